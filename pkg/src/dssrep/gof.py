from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass
import logging
from typing import Iterable, List, NamedTuple, Optional, Sequence, Tuple
import warnings

import numpy as np
from scipy.spatial import cKDTree

from .boundary_division import BoundaryDivision, divide_boundary
from .cms import CmsPointSet, extract_cms
from .flatten import FlatteningMap, flatten_sheet
from .lp_dssrep import LpDssRep, build_lp_dssrep, to_wxyz
from .mesh_core import TriangleMesh, TriangleSoup, jaccard_volume
from .modes import AffinityVariant, Criterion, FlatteningMethod, PlaneMode
from .sweep_fit import DEFAULT_MODE, DEFAULT_STATIONS, DEFAULT_VEIN_SAMPLES, RccReport, SkeletalSheet, SpokeGrid, fit_sweep, up_vector
from .util import axis_angle, orthonormal_frame, polyline_length, tangents

logger = logging.getLogger(__name__)

MIN_IMPLIED_POINTS = 40
MAX_GRID = 7

class GofError(ValueError):
    """Raised when a fit cannot be scored or no candidate fit is acceptable."""
    pass

class ImpliedBoundaryWarning(UserWarning):
    """Used to warn when the implied boundary folds over itself or encloses no volume."""
    pass

def implied_points(sheet:SkeletalSheet, spokes:SpokeGrid) -> np.ndarray:
    """Returns the implied boundary point cloud: every spoke tip and every vein end point."""
    ends = [vein[-1] for vein in sheet.sections.right_veins + sheet.sections.left_veins]
    return np.unique(np.vstack([spokes.tips_up, spokes.tips_down, np.array(ends)]), axis=0)

def collapse(mesh:TriangleMesh, points:np.ndarray) -> Tuple[TriangleSoup, int]:
    """
    Moves every mesh vertex onto its nearest point and drops the faces that become degenerate.  Returns the
    collapsed surface and the number of its faces whose orientation flipped.
    """
    nearest = cKDTree(points).query(mesh.vertices)[1]
    faces = nearest[mesh.faces]
    keep = (faces[:, 0] != faces[:, 1]) & (faces[:, 1] != faces[:, 2]) & (faces[:, 0] != faces[:, 2])
    faces = faces[keep]
    triangles = points[faces]
    normals = np.cross(triangles[:, 1] - triangles[:, 0], triangles[:, 2] - triangles[:, 0])
    flipped = int(np.count_nonzero(np.einsum('ij,ij->i', normals, mesh.face_normals[keep]) < 0))
    return TriangleSoup(points, faces), flipped

def volume_coverage(mesh:TriangleMesh, points:np.ndarray, resolution:int=128) -> float:
    """
    Returns the Jaccard index between the solid of the mesh and the solid of its implied boundary, the mesh
    collapsed onto the implied point cloud.
    """
    points = np.asarray(points, dtype=float)
    if len(points) < MIN_IMPLIED_POINTS:
        raise GofError(f'Need at least {MIN_IMPLIED_POINTS} implied boundary points, got {len(points)}')
    implied, flipped = collapse(mesh, points)
    if flipped:
        warnings.warn(f'The implied boundary folds over itself at {flipped} face(s); coverage counts winding numbers.', ImpliedBoundaryWarning)
    if len(implied.faces) == 0 or abs(implied.signed_volume) <= 1e-12 * mesh.bbox_diagonal ** 3:
        warnings.warn('The implied boundary encloses no volume.', ImpliedBoundaryWarning)
        return 0.0
    return jaccard_volume(mesh, implied, resolution)

def skeletal_symmetry(plus:Sequence[float], minus:Sequence[float]) -> float:
    """
    Returns sum(w_i * f_i) over paired lengths, with w_i = (l+_i + l-_i) / (sum of all lengths) and
    f_i = min(l+_i, l-_i) / max(l+_i, l-_i).
    """
    plus = np.asarray(plus, dtype=float)
    minus = np.asarray(minus, dtype=float)
    if plus.shape != minus.shape or plus.ndim != 1 or len(plus) == 0:
        raise GofError('Need two equally long, nonempty length vectors')
    if np.any(plus <= 0) or np.any(minus <= 0):
        raise GofError('Skeletal symmetry needs positive lengths')
    weights = (plus + minus) / (plus.sum() + minus.sum())
    return float(np.sum(weights * np.minimum(plus, minus) / np.maximum(plus, minus)))

def symmetry_lengths(sheet:SkeletalSheet, spokes:SpokeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (l+, l-): up spoke lengths then right vein lengths, and down spoke lengths then left vein lengths."""
    sections = sheet.sections
    interior = range(1, sections.count - 1)
    right = [polyline_length(sections.right_veins[k]) for k in interior]
    left = [polyline_length(sections.left_veins[k]) for k in interior]
    return np.concatenate([spokes.up_lengths, right]), np.concatenate([spokes.down_lengths, left])

class Tidiness(NamedTuple):
    average:float
    strict:float

def quaternion_distances(rotations:np.ndarray) -> np.ndarray:
    """Returns arccos|q_i . q_{i+1}| between consecutive frames of a curve."""
    q = to_wxyz(rotations)
    return np.arccos(np.clip(np.abs(np.einsum('ij,ij->i', q[:-1], q[1:])), 0.0, 1.0))

def tidiness_scores(spine:np.ndarray, sections:Sequence[np.ndarray], crossings:Sequence[float]) -> Tidiness:
    """
    Scores frame perturbation from the spine frames, the frames of each cross-section center curve and the
    angle between each cross-section and the spine where they meet.

    The average score is 1 - 2 / ((2N + 1) pi) times the sum of the spine's and every cross-section's mean
    consecutive quaternion distance plus the crossing angles, N being the number of cross-sections.  The
    strict score is 1 - 2/pi times the largest single consecutive distance or crossing angle.
    """
    if len(sections) != len(crossings):
        raise GofError('Need one crossing angle per cross-section')
    for frames in [spine] + list(sections):
        if len(frames) < 2:
            raise GofError('Every curve needs at least two frames')
    spine_steps = quaternion_distances(spine)
    section_steps = [quaternion_distances(frames) for frames in sections]
    crossings = np.asarray(crossings, dtype=float)
    count = len(sections)
    total = spine_steps.mean() + sum(s.mean() for s in section_steps) + crossings.sum()
    worst = max([spine_steps.max()] + [s.max() for s in section_steps] + crossings.tolist())
    return Tidiness(float(1.0 - 2.0 * total / ((2 * count + 1) * np.pi)), float(1.0 - 2.0 * worst / np.pi))

def tidiness(sheet:SkeletalSheet, spokes:SpokeGrid) -> Tidiness:
    """
    Measures the tidiness of a fitted sheet.  Spine frames are taken at every station; each cross-section
    center curve runs through its spoke sites from the right crest to the left crest.
    """
    surface = sheet.surface
    spine = sheet.spine
    spine_frames = orthonormal_frame(surface.normal(surface.uv(spine.stations)), spine.tangents)
    sections = []
    crossings = []
    for k in np.unique(spokes.station):
        at = np.flatnonzero(spokes.station == k)
        right = at[spokes.side[at] < 0]
        left = at[spokes.side[at] > 0]
        center = at[spokes.side[at] == 0]
        order = np.concatenate([right[np.argsort(-spokes.step[right])], center, left[np.argsort(spokes.step[left])]])
        sites = spokes.sites[order]
        frames = orthonormal_frame(surface.normal(surface.uv(sites)), tangents(sites))
        sections.append(frames)
        middle = int(np.flatnonzero(order == center[0])[0])
        crossings.append(axis_angle(spine_frames[k + 1][:, 2], frames[middle][:, 1]))
    return tidiness_scores(spine_frames, sections, crossings)

def gof_score(volume_coverage:float, skeletal_symmetry:float, avg_tidiness:float, strict_tidiness:float) -> Tuple[float, float]:
    """Returns (score1, score2): coverage times symmetry times average, respectively strict, tidiness."""
    for name, value in (('volume coverage', volume_coverage), ('skeletal symmetry', skeletal_symmetry), ('average tidiness', avg_tidiness), ('strict tidiness', strict_tidiness)):
        if not -1e-9 <= value <= 1.0 + 1e-9:
            raise GofError(f'{name.capitalize()} must lie in [0, 1], got {value}')
    clip = lambda v: min(max(float(v), 0.0), 1.0)
    base = clip(volume_coverage) * clip(skeletal_symmetry)
    return base * clip(avg_tidiness), base * clip(strict_tidiness)

@dataclass
class GofReport():
    volume_coverage:float
    skeletal_symmetry:float
    avg_tidiness:float
    strict_tidiness:float
    degrees:Tuple[int, int]
    delta:float = 0.5
    rcc_passed:bool = True

    @property
    def score1(self) -> float:
        return gof_score(self.volume_coverage, self.skeletal_symmetry, self.avg_tidiness, self.strict_tidiness)[0]

    @property
    def score2(self) -> float:
        return gof_score(self.volume_coverage, self.skeletal_symmetry, self.avg_tidiness, self.strict_tidiness)[1]

    def score(self, criterion:Criterion) -> float:
        return self.score1 if Criterion(criterion) == Criterion.SCORE1 else self.score2

    def to_dict(self) -> dict:
        data = asdict(self)
        data['degrees'] = list(self.degrees)
        data['score1'] = self.score1
        data['score2'] = self.score2
        return data

@dataclass(eq=False)
class FitResult():
    sheet:SkeletalSheet
    spokes:SpokeGrid
    rep:LpDssRep
    report:GofReport

    @property
    def rcc(self) -> RccReport:
        return self.sheet.sections.rcc

def fit_model(mesh:TriangleMesh, division:BoundaryDivision, cms:CmsPointSet, degrees:Tuple[int, int], stations:int=DEFAULT_STATIONS, vein_samples:int=DEFAULT_VEIN_SAMPLES,
              mode:PlaneMode=DEFAULT_MODE, flat:Optional[FlatteningMap]=None, resolution:int=128, **options) -> FitResult:
    """Fits one (sheet, spine) degree pair, parameterizes it and scores it."""
    sheet, spokes = fit_sweep(mesh, division, cms, degrees, stations, vein_samples, mode, flat, **options)
    rep = build_lp_dssrep(sheet, spokes)
    coverage = volume_coverage(mesh, implied_points(sheet, spokes), resolution)
    symmetry = skeletal_symmetry(*symmetry_lengths(sheet, spokes))
    tidy = tidiness(sheet, spokes)
    report = GofReport(coverage, symmetry, tidy.average, tidy.strict, tuple(int(d) for d in degrees), division.delta, sheet.sections.rcc.passed)
    logger.info('Degrees %s: coverage %.3f, symmetry %.3f, tidiness %.3f / %.3f', report.degrees, coverage, symmetry, tidy.average, tidy.strict)
    return FitResult(sheet, spokes, rep, report)

def _fit_pair(args):
    mesh, division, cms, degrees, options = args
    try:
        fit = fit_model(mesh, division, cms, degrees, **options)
    except ValueError as e:
        return None, f'{type(e).__name__}: {e}'
    # cached interpolators hold qhull state and stay in the worker
    fit.sheet.flat.__dict__.pop('_interpolators', None)
    return fit, None

def fit_grid(mesh:TriangleMesh, grid:int=4, division:Optional[BoundaryDivision]=None, cms:Optional[CmsPointSet]=None,
             delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL, pitch:Optional[float]=None, stations:int=DEFAULT_STATIONS,
             vein_samples:int=DEFAULT_VEIN_SAMPLES, mode:PlaneMode=DEFAULT_MODE, resolution:int=128, flattening:Optional[FlatteningMethod]=None,
             perplexity:float=30.0, iterations:int=1000, seed:int=0, threads:int=1) -> Tuple[List[FitResult], List[str]]:
    """
    Fits every (sheet, spine) degree pair in 1..grid x 1..grid over one boundary division, CMS and
    flattening.  Returns the fits that could be built and a message for each pair that could not.
    """
    if not 1 <= grid <= MAX_GRID:
        raise GofError(f'Degree grid must be in 1..{MAX_GRID}, got {grid}')
    if division is None:
        division = divide_boundary(mesh, delta, variant)
    if cms is None:
        cms = extract_cms(mesh, division, pitch)
    flat = flatten_sheet(cms.points, up_vector(mesh, division), flattening, perplexity, iterations, seed)
    options = {'stations': stations, 'vein_samples': vein_samples, 'mode': mode, 'flat': flat, 'resolution': resolution}
    pairs = [(s, c) for s in range(1, grid + 1) for c in range(1, grid + 1)]
    jobs = [(mesh, division, cms, pair, options) for pair in pairs]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(_fit_pair, jobs))
    else:
        outcomes = [_fit_pair(job) for job in jobs]

    fits = []
    failures = []
    for pair, (fit, error) in zip(pairs, outcomes):
        if fit is None:
            logger.info('Degrees %s failed: %s', pair, error)
            failures.append(f'{pair}: {error}')
        else:
            fits.append(fit)
    return fits, failures

def select_best_fit(mesh:TriangleMesh, grid:int=4, criterion:Criterion=Criterion.SCORE2, **options) -> Tuple[FitResult, List[GofReport]]:
    """
    Runs fit_grid and returns the best fit with the reports of all fits that could be built.  Fits that
    fail the relative curvature condition are reported but never chosen; ties go to the lower total degree.
    """
    fits, failures = fit_grid(mesh, grid, **options)
    failures += [f'{fit.report.degrees}: cross-sections meet inside the object' for fit in fits if not fit.report.rcc_passed]
    candidates = [fit for fit in fits if fit.report.rcc_passed]
    if not candidates:
        raise GofError('No degree pair gave an acceptable fit:\n' + '\n'.join(failures))
    best = min(candidates, key=lambda f: (-f.report.score(criterion), sum(f.report.degrees), f.report.degrees))
    logger.info('Best degrees %s with %s %.4f', best.report.degrees, Criterion(criterion).value, best.report.score(criterion))
    return best, [fit.report for fit in fits]

TABLE_COLUMNS = ('sheet_degree', 'spine_degree', 'delta', 'volume_coverage', 'skeletal_symmetry', 'avg_tidiness', 'strict_tidiness', 'score1', 'score2', 'rcc')

def table_rows(reports:Iterable[GofReport]) -> List[tuple]:
    return [(r.degrees[0], r.degrees[1], r.delta, r.volume_coverage, r.skeletal_symmetry, r.avg_tidiness, r.strict_tidiness, r.score1, r.score2, 'pass' if r.rcc_passed else 'fail') for r in reports]

def write_table_csv(reports:Iterable[GofReport], path:str) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(TABLE_COLUMNS)
        writer.writerows(table_rows(reports))

def format_table(reports:Iterable[GofReport]) -> List[str]:
    """Returns the report table as aligned text lines, header first."""
    rows = [[f'{v:.3f}' if isinstance(v, float) else str(v) for v in row] for row in table_rows(reports)]
    widths = [max([len(c)] + [len(row[i]) for row in rows]) for i, c in enumerate(TABLE_COLUMNS)]
    lines = ['  '.join(c.rjust(w) for c, w in zip(TABLE_COLUMNS, widths))]
    lines.extend('  '.join(v.rjust(w) for v, w in zip(row, widths)) for row in rows)
    return lines
