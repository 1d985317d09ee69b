from dataclasses import dataclass
import logging
from typing import Optional, Tuple
import warnings

from matplotlib.path import Path
import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .boundary_division import BoundaryDivision, Part
from .mesh_core import TriangleMesh, VoxelGrid, contains, principal_grid, voxelize

logger = logging.getLogger(__name__)

MAX_PITCH_FRACTION = 1.0 / 50.0
"""Largest grid pitch accepted, as a fraction of the bounding-box diagonal."""

DEFAULT_PITCH_FRACTION = 1.0 / 64.0

FRAGMENT_TOLERANCE = 0.95
"""A fragmented interface is accepted (keeping its largest piece) when that piece holds this share of the points."""

class CmsError(ValueError):
    """Raised when the equidistance interface between the two boundary parts is empty or broken up."""
    pass

class CmsWarning(UserWarning):
    """Used to warn when small detached fragments of the interface were discarded."""
    pass

@dataclass(eq=False)
class CmsPointSet():
    """Interior points equidistant from the top and bottom boundary parts."""

    points:np.ndarray
    """Interface points, (k, 2) or (k, 3), in grid order."""

    residuals:np.ndarray
    """|d+ - d-| at each point."""

    spacing:float
    """The grid pitch h."""

    def __len__(self) -> int:
        return len(self.points)

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

def default_pitch(points:np.ndarray) -> float:
    points = np.asarray(points, dtype=float)
    return float(np.linalg.norm(points.max(axis=0) - points.min(axis=0)) * DEFAULT_PITCH_FRACTION)

def extract_cms(shape, division, pitch:Optional[float]=None) -> CmsPointSet:
    """
    Returns the central medial skeleton of a mesh or a 2D polygon as the zero set of f = d+ - d-, the
    difference of the distances to the top and bottom boundary parts, sampled on a regular grid of the
    given pitch.

    shape is a TriangleMesh with a BoundaryDivision, or a closed (n, 2) polygon (anything with a points
    attribute) with per-vertex labels (anything with a labels attribute, or the label array itself).
    """
    if isinstance(shape, TriangleMesh):
        if not isinstance(division, BoundaryDivision):
            raise CmsError('A mesh needs a BoundaryDivision')
        outline = shape.vertices
        labels = division.labels
        crest = shape.vertices[division.crest]
    else:
        outline = np.asarray(getattr(shape, 'points', shape), dtype=float)
        labels = np.asarray(getattr(division, 'labels', division))
        crest = outline[_polygon_crest(labels)]

    diagonal = float(np.linalg.norm(outline.max(axis=0) - outline.min(axis=0)))
    if pitch is None:
        pitch = diagonal * DEFAULT_PITCH_FRACTION
    if not 0 < pitch <= diagonal * MAX_PITCH_FRACTION + 1e-12:
        raise CmsError(f'Grid pitch {pitch:g} must be positive and at most 1/50 of the bounding-box diagonal ({diagonal:g})')

    if isinstance(shape, TriangleMesh):
        samples, sample_labels = mesh_boundary_samples(shape, labels, pitch)
        grid = principal_grid(outline, pitch, margin=pitch)
        inside = voxelize(shape, grid)
    else:
        samples, sample_labels = polygon_boundary_samples(outline, labels, pitch)
        grid = principal_grid(outline, pitch, margin=pitch)
        inside = Path(outline).contains_points(grid.points()).reshape(grid.shape)

    top = cKDTree(samples[sample_labels == Part.TOP])
    bottom = cKDTree(samples[sample_labels == Part.BOTTOM])
    field = np.full(grid.shape, np.nan)
    interior = grid.points()[inside.ravel()]
    field[inside] = top.query(interior)[0] - bottom.query(interior)[0]
    logger.debug('CMS grid %s with %d interior samples, pitch %g', grid.shape, len(interior), pitch)

    points = _zero_crossings(grid, field)
    if len(points) == 0:
        raise CmsError('The two boundary parts have no equidistant interior points')

    residuals = np.abs(top.query(points)[0] - bottom.query(points)[0])
    keep = (residuals <= pitch) & (_distance_to_loop(points, crest) > pitch)
    if isinstance(shape, TriangleMesh):
        keep &= contains(shape, points)
    else:
        keep &= Path(outline).contains_points(points)
    points = points[keep]
    residuals = residuals[keep]
    if len(points) == 0:
        raise CmsError('No interface point lies clear of the crest')

    points, residuals = _single_component(points, residuals, pitch)
    logger.info('Extracted %d CMS points', len(points))
    return CmsPointSet(points, residuals, float(pitch))

def mesh_boundary_samples(mesh:TriangleMesh, labels:np.ndarray, pitch:float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Returns boundary sample points and their labels: every vertex, plus a barycentric lattice on each face
    fine enough that neighboring samples are at most pitch apart.  Lattice points take the label of the
    nearest face corner.
    """
    faces = mesh.faces
    triangles = mesh.vertices[faces]
    longest = np.linalg.norm(triangles - np.roll(triangles, 1, axis=1), axis=2).max(axis=1)
    divisions = np.maximum(1, np.ceil(longest / pitch).astype(int))

    points = [mesh.vertices]
    point_labels = [np.asarray(labels)]
    for n in np.unique(divisions[divisions > 1]):
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing='ij')
        i = i.ravel()
        j = j.ravel()
        lattice = (i + j <= n) & ~(((i == n) | (j == n)) | ((i == 0) & (j == 0)))
        weights = np.stack([n - i[lattice] - j[lattice], i[lattice], j[lattice]], axis=1) / n
        selected = np.flatnonzero(divisions == n)
        points.append(np.einsum('lk,fkd->fld', weights, triangles[selected]).reshape(-1, 3))
        corners = faces[selected][:, np.argmax(weights, axis=1)]
        point_labels.append(np.asarray(labels)[corners].ravel())
    return np.vstack(points), np.concatenate(point_labels)

def polygon_boundary_samples(points:np.ndarray, labels:np.ndarray, pitch:float) -> Tuple[np.ndarray, np.ndarray]:
    """Returns the polygon vertices plus edge subdivisions at most pitch apart, labelled by the nearer edge end."""
    following = np.roll(points, -1, axis=0)
    following_labels = np.roll(labels, -1)
    samples = [points]
    sample_labels = [np.asarray(labels)]
    for a, b, la, lb in zip(points, following, labels, following_labels):
        n = int(np.ceil(np.linalg.norm(b - a) / pitch))
        if n > 1:
            t = np.arange(1, n) / n
            samples.append(a + t[:, None] * (b - a))
            sample_labels.append(np.where(t < 0.5, la, lb))
    return np.vstack(samples), np.concatenate(sample_labels)

def _polygon_crest(labels:np.ndarray) -> np.ndarray:
    labels = np.asarray(labels)
    changes = (labels == Part.TOP) & ((np.roll(labels, 1) == Part.BOTTOM) | (np.roll(labels, -1) == Part.BOTTOM))
    return np.flatnonzero(changes)

def _zero_crossings(grid:VoxelGrid, field:np.ndarray) -> np.ndarray:
    """Returns linear zero crossings of field along grid edges with both ends inside, plus exact zeros, in grid order."""
    shape = np.array(grid.shape)
    keys = []
    points = []

    exact = np.argwhere(field == 0)
    if len(exact):
        keys.append(np.stack([np.ravel_multi_index(exact.T, grid.shape), np.full(len(exact), -1)], axis=1))
        points.append(exact.astype(float))

    for axis in range(len(shape)):
        lower = [slice(None)] * len(shape)
        upper = [slice(None)] * len(shape)
        lower[axis] = slice(None, -1)
        upper[axis] = slice(1, None)
        f0 = field[tuple(lower)]
        f1 = field[tuple(upper)]
        with np.errstate(invalid='ignore'):
            crossing = f0 * f1 < 0
        index = np.argwhere(crossing)
        if len(index) == 0:
            continue
        a = f0[crossing]
        b = f1[crossing]
        offset = np.zeros(len(shape))
        offset[axis] = 1.0
        points.append(index + (a / (a - b))[:, None] * offset)
        keys.append(np.stack([np.ravel_multi_index(index.T, grid.shape), np.full(len(index), axis)], axis=1))

    if not points:
        return np.zeros((0, len(shape)))
    keys = np.vstack(keys)
    local = np.vstack(points)[np.lexsort((keys[:, 1], keys[:, 0]))]
    return grid.origin + (local * grid.spacing) @ grid.axes

def _distance_to_loop(points:np.ndarray, loop:np.ndarray, chunk:int=4096) -> np.ndarray:
    """Returns the distance from each point to the closed polyline through loop."""
    starts = loop
    edges = np.roll(loop, -1, axis=0) - loop
    lengths2 = np.maximum(np.einsum('ij,ij->i', edges, edges), 1e-300)
    distances = np.empty(len(points))
    for begin in range(0, len(points), chunk):
        p = points[begin:begin + chunk, None, :] - starts[None, :, :]
        t = np.clip(np.einsum('nij,ij->ni', p, edges) / lengths2, 0.0, 1.0)
        nearest = p - t[:, :, None] * edges[None, :, :]
        distances[begin:begin + chunk] = np.linalg.norm(nearest, axis=2).min(axis=1)
    return distances

def _single_component(points:np.ndarray, residuals:np.ndarray, pitch:float) -> Tuple[np.ndarray, np.ndarray]:
    pairs = cKDTree(points).query_pairs(2.0 * pitch, output_type='ndarray')
    n = len(points)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n)) if len(pairs) else coo_matrix((n, n))
    count, component = connected_components(graph, directed=False)
    if count == 1:
        return points, residuals
    sizes = np.bincount(component)
    largest = int(np.argmax(sizes))
    share = sizes[largest] / n
    if share < FRAGMENT_TOLERANCE:
        raise CmsError(f'The interface splits into {count} pieces; the largest holds only {share:.0%} of the points')
    warnings.warn(f'Discarded {n - sizes[largest]} points in {count - 1} detached interface fragment(s).', CmsWarning)
    keep = component == largest
    return points[keep], residuals[keep]
