from dataclasses import dataclass
import logging
from typing import List, Optional, Tuple
import warnings

from matplotlib.path import Path
import numpy as np
from scipy.optimize import brentq
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree
import trimesh

from .boundary_division import BoundaryDivision, Part, divide_polygon
from .cms import CmsPointSet, extract_cms
from .flatten import FlatteningMap, flatten_sheet, pca_flatten
from .gc2d import Gc2dModel, Polygon2D, PolyCurve2D, RccWarning, curve_frame, fit_relaxed_cms_2d, semi_chordal_structure
from .mesh_core import Spoke, TriangleMesh, ray_intersect
from .modes import AffinityVariant, FlatteningMethod, PlaneMode
from .util import arclength, point_at, principal_axes, tangents, unit

logger = logging.getLogger(__name__)

MAX_DEGREE = 7
DEFAULT_STATIONS = 15
DEFAULT_VEIN_SAMPLES = 3
DEFAULT_MODE = PlaneMode.RELAXED_SPINE_CHORDAL_PLANES
SPINE_SAMPLES = 401
MAX_CONDITION = 1e10

class SweepError(ValueError):
    """Raised when a swept skeletal structure cannot be fitted to an object."""
    pass

def _exponents(degree:int) -> List[Tuple[int, int]]:
    return [(i, total - i) for total in range(degree + 1) for i in range(total, -1, -1)]

@dataclass(eq=False)
class SheetSurface():
    """A polynomial height field h(u, v) of total degree at most `degree` over the principal plane of the CMS."""

    centroid:np.ndarray
    axes:np.ndarray
    """Rows e1, e2, e3; e3 points toward the top part."""

    coefficients:np.ndarray
    """One coefficient per monomial of _exponents(degree), in scaled coordinates."""

    degree:int
    scale:float

    residual:float
    """RMS height residual of the fit."""

    def uv(self, points:np.ndarray) -> np.ndarray:
        return (np.atleast_2d(points) - self.centroid) @ self.axes[:2].T

    def height(self, uv:np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(uv) / self.scale
        return sum(c * uv[:, 0] ** i * uv[:, 1] ** j for c, (i, j) in zip(self.coefficients, _exponents(self.degree)))

    def gradient(self, uv:np.ndarray) -> np.ndarray:
        s = np.atleast_2d(uv) / self.scale
        hu = np.zeros(len(s))
        hv = np.zeros(len(s))
        for c, (i, j) in zip(self.coefficients, _exponents(self.degree)):
            if i > 0:
                hu += c * i * s[:, 0] ** (i - 1) * s[:, 1] ** j
            if j > 0:
                hv += c * j * s[:, 0] ** i * s[:, 1] ** (j - 1)
        return np.stack([hu, hv], axis=1) / self.scale

    def point(self, uv:np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return self.centroid + uv @ self.axes[:2] + self.height(uv)[:, None] * self.axes[2]

    def normal(self, uv:np.ndarray) -> np.ndarray:
        """Unit sheet normals, on the top side."""
        g = self.gradient(uv)
        return unit(-g[:, :1] * self.axes[0] - g[:, 1:] * self.axes[1] + self.axes[2])

    def deviation(self, points:np.ndarray) -> np.ndarray:
        """Returns the height distance of points from the sheet along e3."""
        points = np.atleast_2d(points)
        return np.abs((points - self.centroid) @ self.axes[2] - self.height(self.uv(points)))

    def grid(self, uv_min:np.ndarray, uv_max:np.ndarray, count:int=50) -> np.ndarray:
        """Samples the sheet on a regular (count, count) parameter grid."""
        u, v = np.meshgrid(np.linspace(uv_min[0], uv_max[0], count), np.linspace(uv_min[1], uv_max[1], count), indexing='ij')
        return self.point(np.stack([u.ravel(), v.ravel()], axis=1)).reshape(count, count, 3)

def fit_skeletal_sheet(cms:CmsPointSet, degree:int, flat:Optional[FlatteningMap]=None, up:Optional[np.ndarray]=None, allow_irregular:bool=False) -> SheetSurface:
    """
    Relaxes the CMS into a least-squares polynomial height field of the given total degree over its
    principal plane.  The CMS must be PCA-flatable unless allow_irregular is set.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise SweepError(f'Sheet degree must be in 1..{MAX_DEGREE}, got {degree}')
    points = cms.points
    exponents = _exponents(degree)
    if len(points) < len(exponents):
        raise SweepError(f'Need at least {len(exponents)} CMS points for degree {degree}, got {len(points)}')
    if flat is None:
        flat = pca_flatten(points, up)
    if not flat.flatable and not allow_irregular:
        raise SweepError('The CMS is not PCA-flatable; fit it as a treatable irregular object instead')

    if flat.method == FlatteningMethod.PCA:
        centroid, axes = flat.centroid, flat.axes
    else:
        centroid, axes, _ = principal_axes(points, up)
    local = (points - centroid) @ axes.T
    scale = float(np.abs(local[:, :2]).max())
    s = local[:, :2] / scale
    design = np.stack([s[:, 0] ** i * s[:, 1] ** j for i, j in exponents], axis=1)
    if np.linalg.cond(design) > MAX_CONDITION:
        raise SweepError(f'Ill-conditioned sheet fit at degree {degree}')
    coefficients, *_ = np.linalg.lstsq(design, local[:, 2], rcond=None)
    residual = float(np.sqrt(np.mean((design @ coefficients - local[:, 2]) ** 2)))
    logger.debug('Sheet degree %d: RMS residual %.3g', degree, residual)
    return SheetSurface(centroid, axes, coefficients, degree, scale, residual)

@dataclass(eq=False)
class Spine():
    points:np.ndarray
    """The spine as a dense 3D polyline from Gamma0 to Gamma1."""

    stations:np.ndarray
    """The N station points, ends included."""

    station_lengths:np.ndarray
    """3D arclength of each station along points."""

    tangents:np.ndarray
    """Unit spine tangents at the stations."""

    curve:PolyCurve2D
    """The relaxed center curve of the flattened sheet."""

    crest:Polygon2D
    """The crest in flattened coordinates, labelled so that Gamma0 and Gamma1 end its bottom run."""

    chords:Optional[Gc2dModel] = None

    @property
    def length(self) -> float:
        return float(arclength(self.points)[-1])

def crest_polygon(coords:np.ndarray, delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL) -> Polygon2D:
    """
    Divides the flattened crest loop into two arcs and labels the arc holding loop index 0 as the bottom
    run, so the object vertices follow from the loop's own starting point.
    """
    coords = np.asarray(coords, dtype=float)
    area = 0.5 * np.sum(coords[:, 0] * np.roll(coords[:, 1], -1) - coords[:, 1] * np.roll(coords[:, 0], -1))
    if area < 0:
        coords = np.concatenate([coords[:1], coords[1:][::-1]])
    labels = divide_polygon(coords, delta, variant)
    labels = np.where(labels == labels[0], Part.BOTTOM, Part.TOP).astype(np.int8)
    return Polygon2D(coords, labels)

def _lift(surface:SheetSurface, flat:FlatteningMap, coords:np.ndarray) -> np.ndarray:
    if flat.method == FlatteningMethod.PCA:
        return surface.point(coords)
    return surface.point(surface.uv(flat.lift(coords)))

def fit_spine(surface:SheetSurface, flat:FlatteningMap, crest_points:np.ndarray, degree:int, stations:int=DEFAULT_STATIONS, mode:PlaneMode=DEFAULT_MODE, delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL) -> Spine:
    """
    Fits the relaxed center curve to the 2D CMS of the flattened sheet, the region bounded by the flattened
    crest, extends it to the two object vertices found on that crest, lifts it onto the sheet and places
    the stations.  The spine therefore starts and ends on the lifted object vertices.

    Normal-plane stations sit at uniform 3D arclength fractions k/(N-1).  Chordal-plane stations follow
    the semi-chords of the flattened sheet; with the chordal spine, the spine runs through the chord
    midpoints instead of the relaxed curve.
    """
    if stations < 3:
        raise SweepError(f'Need at least 3 stations, got {stations}')
    mode = PlaneMode(mode)
    polygon = crest_polygon(flat.project(crest_points), delta, variant)
    start, end = (polygon.points[i] for i in polygon.vertices)
    cms = extract_cms(polygon, polygon.labels)
    origin, axes = curve_frame(cms.points, start, end)
    if not float((end - start) @ axes[0]) > 0:
        raise SweepError('The object vertices do not lie on opposite ends of the flattened sheet')
    curve = fit_relaxed_cms_2d(cms.points, degree, origin, axes, ends=np.stack([start, end]))
    x0, x1 = curve.domain

    dense = _lift(surface, flat, curve.at_x(np.linspace(x0, x1, SPINE_SAMPLES)))
    table = arclength(dense)
    chords = None
    if mode.chordal_planes:
        chords = semi_chordal_structure(curve, polygon, stations - 2)
        if mode == PlaneMode.CHORDAL_SPINE_CHORDAL_PLANES:
            inner = chords.skeleton
        else:
            inner = np.array([c.spine_point for c in chords.chords])
        station_points = _lift(surface, flat, np.vstack([curve.at_x(x0), inner, curve.at_x(x1)]))
        if mode == PlaneMode.CHORDAL_SPINE_CHORDAL_PLANES:
            dense = station_points
            table = arclength(dense)
            lengths = table
        else:
            xs = np.concatenate([[x0], curve.x_at(chords.lengths), [x1]])
            lengths = np.interp(xs, np.linspace(x0, x1, SPINE_SAMPLES), table)
    else:
        lengths = table[-1] * np.arange(stations) / (stations - 1)
        station_points = point_at(dense, table, lengths)

    station_tangents = unit(point_at(tangents(dense), table, lengths))
    deviation = surface.deviation(station_points).max()
    logger.info('Spine degree %d: length %.4g, %d stations, max sheet deviation %.2g', degree, table[-1], stations, deviation)
    return Spine(dense, station_points, lengths, station_tangents, curve, polygon, chords)

def rotation_minimizing_frames(points:np.ndarray, tangents:np.ndarray, reference:np.ndarray) -> np.ndarray:
    """
    Returns rotation-minimizing reference vectors along a polyline by the double-reflection method,
    starting from reference made orthogonal to the first tangent.
    """
    points = np.asarray(points, dtype=float)
    tangents = unit(tangents)
    r0 = np.asarray(reference, dtype=float)
    frames = [unit(r0 - np.dot(r0, tangents[0]) * tangents[0])]
    for i in range(len(points) - 1):
        r = frames[-1]
        v1 = points[i + 1] - points[i]
        c1 = np.dot(v1, v1)
        if c1 < 1e-300:
            frames.append(r)
            continue
        r_left = r - (2.0 / c1) * np.dot(v1, r) * v1
        t_left = tangents[i] - (2.0 / c1) * np.dot(v1, tangents[i]) * v1
        v2 = tangents[i + 1] - t_left
        c2 = np.dot(v2, v2)
        frames.append(unit(r_left - (2.0 / c2) * np.dot(v2, r_left) * v2 if c2 > 1e-300 else r_left))
    return np.array(frames)

@dataclass(eq=False)
class RccReport():
    intersects_inside:np.ndarray
    """Per consecutive pair of interior stations, True when their cross-sections meet inside the object."""

    margin:np.ndarray
    """Signed clearance: negative overlap length when the sections meet, positive separation otherwise."""

    @property
    def passed(self) -> bool:
        return not bool(np.any(self.intersects_inside))

    def to_dict(self) -> dict:
        return {'passed': self.passed, 'intersects_inside': self.intersects_inside.tolist(), 'margin': self.margin.tolist()}

@dataclass(eq=False)
class CrossSections():
    origins:np.ndarray
    normals:np.ndarray
    """Slicing-plane normals, along the spine direction."""

    left:np.ndarray
    """In-plane unit direction of the left vein at each station."""

    right_veins:List[np.ndarray]
    left_veins:List[np.ndarray]
    """Per station, the vein from the spine to the crest as a 3D polyline.  End stations have one point."""

    rcc:RccReport

    @property
    def count(self) -> int:
        return len(self.origins)

@dataclass(eq=False)
class SkeletalSheet():
    surface:SheetSurface
    flat:FlatteningMap
    spine:Spine
    sections:CrossSections
    mode:PlaneMode
    delta:float = 0.5
    """The affinity parameter of the boundary division the sheet was fitted to."""

    @property
    def degrees(self) -> Tuple[int, int]:
        return self.surface.degree, self.spine.curve.degree

def _clip_polygon(surface:SheetSurface, mesh:TriangleMesh, division:BoundaryDivision) -> Polygon2D:
    return Polygon2D(surface.uv(mesh.vertices[division.crest]))

def _march_vein(surface:SheetSurface, clip:Polygon2D, region:Path, origin:np.ndarray, normal:np.ndarray, direction:np.ndarray, step:float, max_steps:int=100000) -> np.ndarray:
    """Follows the intersection of the sheet with a plane from origin until it leaves the crest outline."""
    def offset(uv):
        return float(np.dot(surface.point(uv)[0] - origin, normal))

    current = surface.uv(origin)[0]
    if not region.contains_point(current):
        raise SweepError('A station lies outside the crest outline')
    heading = unit(np.array([np.dot(direction, surface.axes[0]), np.dot(direction, surface.axes[1])]))
    path = [current]
    for _ in range(max_steps):
        guess = current + step * heading
        across = np.array([-heading[1], heading[0]])
        lo, hi = -step, step
        for _ in range(12):
            if offset(guess + lo * across) * offset(guess + hi * across) <= 0:
                break
            lo, hi = 2 * lo, 2 * hi
        else:
            raise SweepError('A slicing plane leaves the sheet before reaching the crest')
        s = brentq(lambda s: offset(guess + s * across), lo, hi, xtol=1e-12 * surface.scale)
        following = guess + s * across
        if not region.contains_point(following):
            hit = clip.cast(current, unit(following - current))
            if hit is None or np.linalg.norm(hit - current) > 2.0 * np.linalg.norm(following - current):
                hit = current
            path.append(hit)
            break
        heading = unit(following - current)
        path.append(following)
        current = following
    else:
        raise SweepError('A vein did not reach the crest')
    return surface.point(np.array(path))

def build_cross_sections(surface:SheetSurface, spine:Spine, mesh:TriangleMesh, division:BoundaryDivision, mode:PlaneMode=DEFAULT_MODE, step:Optional[float]=None) -> CrossSections:
    """
    Places a slicing plane at every spine station and traces its right and left veins on the sheet.

    Chordal planes contain the lifted semi-chord and e3; normal planes are orthogonal to the spine
    tangent, with their in-plane directions carried by rotation-minimizing frames.  Veins end on the crest
    outline in sheet coordinates.
    """
    mode = PlaneMode(mode)
    count = len(spine.stations)
    clip = _clip_polygon(surface, mesh, division)
    region = Path(clip.points)
    if step is None:
        step = clip.perimeter / 400.0

    sheet_normals = surface.normal(surface.uv(spine.stations))
    reference = rotation_minimizing_frames(spine.stations, spine.tangents, sheet_normals[0])
    origins = spine.stations.copy()
    normals = np.zeros((count, 3))
    left = np.zeros((count, 3))
    right_veins = []
    left_veins = []
    for k in range(count):
        t = spine.tangents[k]
        across = unit(np.cross(sheet_normals[k], t))
        if mode.chordal_planes and spine.chords is not None and 0 < k < count - 1:
            d = spine.chords.chords[k - 1].direction
            d3 = unit(d[0] * surface.axes[0] + d[1] * surface.axes[1])
            if np.dot(d3, across) < 0:
                d3 = -d3
            plane_normal = unit(np.cross(d3, surface.axes[2]))
            if np.dot(plane_normal, t) < 0:
                plane_normal = -plane_normal
            left[k] = d3
        else:
            plane_normal = t
            left[k] = unit(np.cross(reference[k], t))
        normals[k] = plane_normal

        if k in (0, count - 1):
            right_veins.append(origins[k][None, :].copy())
            left_veins.append(origins[k][None, :].copy())
            continue
        right_veins.append(_march_vein(surface, clip, region, origins[k], plane_normal, -left[k], step))
        left_veins.append(_march_vein(surface, clip, region, origins[k], plane_normal, left[k], step))

    rcc = rcc_report(mesh, origins[1:-1], normals[1:-1])
    return CrossSections(origins, normals, left, right_veins, left_veins, rcc)

def _plane_basis(normal:np.ndarray) -> np.ndarray:
    helper = np.eye(3)[int(np.argmin(np.abs(normal)))]
    a1 = unit(np.cross(normal, helper))
    return np.stack([a1, np.cross(normal, a1)])

def station_section(mesh:trimesh.Trimesh, origin:np.ndarray, normal:np.ndarray, tol:float) -> np.ndarray:
    """
    Returns the segments, (k, 2, 3), of the closed loop of the plane section that encloses origin, or an
    empty array when none does.
    """
    segments = trimesh.intersections.mesh_plane(mesh, plane_normal=normal, plane_origin=origin)
    if len(segments) == 0:
        return np.zeros((0, 2, 3))
    ends = segments.reshape(-1, 3)
    n = len(ends)
    pairs = cKDTree(ends).query_pairs(tol, output_type='ndarray')
    rows = np.concatenate([np.arange(0, n, 2), pairs[:, 0] if len(pairs) else np.zeros(0, dtype=int)])
    cols = np.concatenate([np.arange(1, n, 2), pairs[:, 1] if len(pairs) else np.zeros(0, dtype=int)])
    _, component = connected_components(coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)), directed=False)
    loop_of = component[0::2]

    local = (segments - origin) @ _plane_basis(normal).T
    ray = unit(np.array([1.0, 0.0123]))
    a, b = local[:, 0], local[:, 1]
    e = b - a
    denom = ray[0] * e[:, 1] - ray[1] * e[:, 0]
    safe = np.where(np.abs(denom) > 1e-300, denom, 1.0)
    t = (a[:, 0] * e[:, 1] - a[:, 1] * e[:, 0]) / safe
    s = (a[:, 0] * ray[1] - a[:, 1] * ray[0]) / safe
    crossing = (np.abs(denom) > 1e-300) & (t > 0) & (s >= 0) & (s < 1)

    best = None
    for loop in np.unique(loop_of):
        members = loop_of == loop
        if crossing[members].sum() % 2 == 1:
            size = np.ptp(local[members].reshape(-1, 2), axis=0).sum()
            if best is None or size < best[0]:
                best = (size, loop)
    if best is None:
        return np.zeros((0, 2, 3))
    return segments[loop_of == best[1]]

def _line_intervals(segments:np.ndarray, plane_origin:np.ndarray, plane_normal:np.ndarray, line_point:np.ndarray, line_direction:np.ndarray) -> np.ndarray:
    if len(segments) == 0:
        return np.zeros((0, 2))
    side = (segments - plane_origin) @ plane_normal
    crossing = side[:, 0] * side[:, 1] < 0
    d0 = side[crossing, 0]
    d1 = side[crossing, 1]
    points = segments[crossing, 0] + (d0 / (d0 - d1))[:, None] * (segments[crossing, 1] - segments[crossing, 0])
    along = np.sort((points - line_point) @ line_direction)
    along = along[:len(along) - len(along) % 2]
    return along.reshape(-1, 2)

def _overlap(a:np.ndarray, b:np.ndarray) -> float:
    total = 0.0
    for lo, hi in a:
        for lo2, hi2 in b:
            total += max(0.0, min(hi, hi2) - max(lo, lo2))
    return total

def _gap(a:np.ndarray, b:np.ndarray) -> float:
    return float(min(max(lo2 - hi, lo - hi2) for lo, hi in a for lo2, hi2 in b))

def rcc_report(mesh:TriangleMesh, origins:np.ndarray, normals:np.ndarray) -> RccReport:
    """
    Tests every consecutive pair of slicing planes: the cross-section of each plane is the section loop
    around its station, and two cross-sections meet inside the object when their extents along the common
    line of the two planes overlap.
    """
    shape = mesh.to_trimesh()
    tol = 1e-7 * mesh.bbox_diagonal
    sections = [station_section(shape, o, n, tol) for o, n in zip(origins, normals)]
    inside = []
    margins = []
    for i in range(len(origins) - 1):
        n1, n2 = normals[i], normals[i + 1]
        o1, o2 = origins[i], origins[i + 1]
        direction = np.cross(n1, n2)
        if np.linalg.norm(direction) < 1e-12:
            inside.append(False)
            margins.append(abs(float(np.dot(o2 - o1, n1))))
            continue
        direction = unit(direction)
        point = np.linalg.lstsq(np.stack([n1, n2]), np.array([np.dot(n1, o1), np.dot(n2, o2)]), rcond=None)[0]
        first = _line_intervals(sections[i], o2, n2, point, direction)
        second = _line_intervals(sections[i + 1], o1, n1, point, direction)
        overlap = _overlap(first, second)
        if overlap > tol:
            inside.append(True)
            margins.append(-overlap)
        elif len(first) and len(second):
            inside.append(False)
            margins.append(_gap(first, second))
        else:
            inside.append(False)
            reach = [np.abs((sections[i].reshape(-1, 3) - o2) @ n2).min() if len(sections[i]) else np.inf,
                     np.abs((sections[i + 1].reshape(-1, 3) - o1) @ n1).min() if len(sections[i + 1]) else np.inf]
            margins.append(float(min(reach)))
    return RccReport(np.array(inside, dtype=bool), np.array(margins, dtype=float))

@dataclass(eq=False)
class SpokeGrid():
    """Up and down spokes at every skeletal site; down directions are the negated up directions."""

    sites:np.ndarray
    directions:np.ndarray
    """Unit up directions; the down spoke at each site points the opposite way."""

    up_lengths:np.ndarray
    down_lengths:np.ndarray

    station:np.ndarray
    """Index of the interior station of each site, 0 for the first interior station."""

    side:np.ndarray
    """0 on the spine, -1 on the right vein, +1 on the left vein."""

    step:np.ndarray
    """Position along the vein, 1..m, and 0 on the spine."""

    up_faces:np.ndarray
    down_faces:np.ndarray

    @property
    def tips_up(self) -> np.ndarray:
        return self.sites + self.up_lengths[:, None] * self.directions

    @property
    def tips_down(self) -> np.ndarray:
        return self.sites - self.down_lengths[:, None] * self.directions

    def spokes(self) -> List[Tuple[Spoke, Spoke]]:
        return [(Spoke(p, u, float(r1)), Spoke(p, -u, float(r2))) for p, u, r1, r2 in zip(self.sites, self.directions, self.up_lengths, self.down_lengths)]

def vein_samples(vein:np.ndarray, count:int) -> np.ndarray:
    """Returns count points along a vein at arclength fractions j/(count+1), j = 1..count."""
    table = arclength(vein)
    if table[-1] <= 0:
        raise SweepError('Degenerate vein')
    return point_at(vein, table, table[-1] * np.arange(1, count + 1) / (count + 1))

def compute_spokes(sheet:SkeletalSheet, mesh:TriangleMesh, division:BoundaryDivision, samples_per_vein:int=DEFAULT_VEIN_SAMPLES) -> SpokeGrid:
    """
    Casts an up spoke along the sheet normal to the top part and a down spoke the opposite way to the
    bottom part, at every interior spine station and at samples_per_vein points along each of its veins.
    With chordal planes the normal is first projected into the station's plane.
    """
    if samples_per_vein < 1:
        raise SweepError('Need at least one sample per vein')
    top = division.part_faces(mesh, Part.TOP)
    bottom = division.part_faces(mesh, Part.BOTTOM)
    sections = sheet.sections
    chordal = sheet.mode.chordal_planes

    rows = []
    for k in range(1, sections.count - 1):
        sites = [(sections.origins[k], 0, 0)]
        sites += [(p, -1, j + 1) for j, p in enumerate(vein_samples(sections.right_veins[k], samples_per_vein))]
        sites += [(p, 1, j + 1) for j, p in enumerate(vein_samples(sections.left_veins[k], samples_per_vein))]
        plane_normal = sections.normals[k]
        for point, side, step in sites:
            u = sheet.surface.normal(sheet.surface.uv(point))[0]
            if chordal:
                u = unit(u - np.dot(u, plane_normal) * plane_normal)
            up = ray_intersect(mesh, point, u, faces=top)
            down = ray_intersect(mesh, point, -u, faces=bottom)
            if up is None or down is None:
                raise SweepError(f'A spoke at station {k} misses its boundary part')
            rows.append((point, u, up.t, down.t, k - 1, side, step, up.face, down.face))

    columns = list(zip(*rows))
    return SpokeGrid(np.array(columns[0]), np.array(columns[1]), np.array(columns[2]), np.array(columns[3]),
                     np.array(columns[4]), np.array(columns[5]), np.array(columns[6]), np.array(columns[7]), np.array(columns[8]))

def up_vector(mesh:TriangleMesh, division:BoundaryDivision) -> np.ndarray:
    """Returns the direction from the mean bottom vertex to the mean top vertex."""
    return mesh.vertices[division.top].mean(axis=0) - mesh.vertices[division.bottom].mean(axis=0)

def fit_sweep(mesh:TriangleMesh, division:BoundaryDivision, cms:CmsPointSet, degrees:Tuple[int, int], stations:int=DEFAULT_STATIONS, vein_samples:int=DEFAULT_VEIN_SAMPLES, mode:PlaneMode=DEFAULT_MODE,
              flat:Optional[FlatteningMap]=None, flattening:Optional[FlatteningMethod]=None, perplexity:float=30.0, iterations:int=1000, seed:int=0) -> Tuple[SkeletalSheet, SpokeGrid]:
    """
    Fits the sheet, spine, cross-sections and spokes for one (sheet, spine) degree pair.

    Objects whose CMS is only t-SNE-flattenable use normal planes.  A failed relative curvature check is
    reported with an RccWarning.
    """
    mode = PlaneMode(mode)
    up = up_vector(mesh, division)
    if flat is None:
        flat = flatten_sheet(cms.points, up, flattening, perplexity, iterations, seed)
    if flat.method == FlatteningMethod.TSNE and mode.chordal_planes:
        logger.info('Treatable irregular object: switching to normal planes')
        mode = PlaneMode.RELAXED_SPINE_NORMAL_PLANES

    surface = fit_skeletal_sheet(cms, degrees[0], flat, up, allow_irregular=flat.method == FlatteningMethod.TSNE)
    spine = fit_spine(surface, flat, mesh.vertices[division.crest], degrees[1], stations, mode, division.delta, division.variant)
    sections = build_cross_sections(surface, spine, mesh, division, mode)
    if not sections.rcc.passed:
        warnings.warn(f'Cross-sections meet inside the object at {int(sections.rcc.intersects_inside.sum())} station pair(s).', RccWarning)
    sheet = SkeletalSheet(surface, flat, spine, sections, mode, division.delta)
    return sheet, compute_spokes(sheet, mesh, division, vein_samples)
