from dataclasses import dataclass
from functools import cached_property
import logging
import os
from typing import Iterable, NamedTuple, Optional
import warnings

import numpy as np
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import dijkstra
import trimesh

from .modes import MeshFormat
from .util import principal_axes, unit

logger = logging.getLogger(__name__)

class MeshError(ValueError):
    """Raised when a mesh cannot be read or is not a closed, genus-0, consistently oriented surface."""
    pass

class OrientationWarning(UserWarning):
    """Used to warn when an inward-facing mesh had its faces flipped to face outward."""
    pass

class TriangleMesh():
    """
    A closed triangle mesh bounding a solid homeomorphic to a ball.

    Construction validates the surface: every edge must be shared by exactly two faces, faces must be
    consistently oriented, every vertex must be referenced and the Euler characteristic must be 2.  An
    inward-facing mesh is flipped with an OrientationWarning.  Arrays are read-only afterwards.
    """

    def __init__(self, vertices, faces, validate:bool=True):
        vertices = np.array(vertices, dtype=float)
        faces = np.array(faces, dtype=np.int64)
        if vertices.ndim != 2 or vertices.shape[1] != 3:
            raise MeshError(f'Vertices must be an (n, 3) array, got shape {vertices.shape}')
        if faces.ndim != 2 or faces.shape[1] != 3 or len(faces) == 0:
            raise MeshError(f'Faces must be a non-empty (m, 3) array, got shape {faces.shape}')

        self.vertices = vertices
        """Vertex positions, (V, 3)."""

        self.faces = faces
        """Vertex index triples, counter-clockwise seen from outside, (F, 3)."""

        if validate:
            self._validate()
            if self.signed_volume < 0:
                warnings.warn('Mesh faces point inward; flipping face orientation.', OrientationWarning)
                self.faces = self.faces[:, ::-1].copy()
                for cached in [key for key in self.__dict__ if key not in ('vertices', 'faces')]:
                    del self.__dict__[cached]

        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)

    def __str__(self) -> str:
        return f'TriangleMesh(V={self.vertex_count}, F={self.face_count})'

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def face_count(self) -> int:
        return len(self.faces)

    def _validate(self) -> None:
        faces = self.faces
        if faces.min() < 0 or faces.max() >= self.vertex_count:
            raise MeshError('Face references a vertex index out of range')
        if ((faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 2] == faces[:, 0])).any():
            raise MeshError('Degenerate face with a repeated vertex index')

        counts = self._edge_census[2]
        if (counts > 2).any():
            raise MeshError(f'Non-manifold mesh: {int((counts > 2).sum())} edge(s) shared by more than two faces')
        if (counts < 2).any():
            raise MeshError(f'Open boundary: {int((counts < 2).sum())} edge(s) belong to a single face')

        half_edges = self._half_edges
        if len(np.unique(half_edges, axis=0)) != len(half_edges):
            raise MeshError('Inconsistent face orientation')

        if len(np.unique(faces)) != self.vertex_count:
            raise MeshError('Mesh has unreferenced vertices')

        euler = self.vertex_count - len(self.edges) + self.face_count
        if euler != 2:
            raise MeshError(f'Mesh must have genus 0 (Euler characteristic 2), got {euler}')

    @cached_property
    def _half_edges(self) -> np.ndarray:
        f = self.faces
        return np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])

    @cached_property
    def _edge_census(self):
        undirected = np.sort(self._half_edges, axis=1)
        edges, inverse, counts = np.unique(undirected, axis=0, return_inverse=True, return_counts=True)
        return edges, inverse.reshape(-1), counts

    @cached_property
    def edges(self) -> np.ndarray:
        """Unique undirected edges as sorted index pairs, (E, 2)."""
        return self._edge_census[0]

    @cached_property
    def face_edges(self) -> np.ndarray:
        """For each face, the indices into edges of its edges (v0v1, v1v2, v2v0), (F, 3)."""
        return self._edge_census[1].reshape(3, -1).T

    @cached_property
    def edge_lengths(self) -> np.ndarray:
        return np.linalg.norm(self.vertices[self.edges[:, 0]] - self.vertices[self.edges[:, 1]], axis=1)

    @cached_property
    def mean_edge_length(self) -> float:
        return float(self.edge_lengths.mean())

    @cached_property
    def _face_cross(self) -> np.ndarray:
        v = self.vertices[self.faces]
        return np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])

    @cached_property
    def face_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._face_cross, axis=1)

    @cached_property
    def face_normals(self) -> np.ndarray:
        return unit(self._face_cross)

    @cached_property
    def vertex_normals(self) -> np.ndarray:
        """Area-weighted averages of the incident face normals, unit length."""
        accumulated = np.zeros_like(self.vertices)
        cross = self._face_cross
        for k in range(3):
            np.add.at(accumulated, self.faces[:, k], cross)
        return unit(accumulated)

    @cached_property
    def signed_volume(self) -> float:
        v = self.vertices[self.faces]
        return float(np.einsum('ij,ij->i', v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    @cached_property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

    @cached_property
    def adjacency(self) -> csr_matrix:
        """Symmetric sparse edge graph weighted by edge length."""
        n = self.vertex_count
        e = self.edges
        w = self.edge_lengths
        graph = coo_matrix((np.concatenate([w, w]), (np.concatenate([e[:, 0], e[:, 1]]), np.concatenate([e[:, 1], e[:, 0]]))), shape=(n, n))
        return graph.tocsr()

    def neighbors(self, vertex:int) -> np.ndarray:
        """Returns the indices of the vertices sharing an edge with vertex."""
        graph = self.adjacency
        return graph.indices[graph.indptr[vertex]:graph.indptr[vertex + 1]]

    def transformed(self, matrix:np.ndarray) -> 'TriangleMesh':
        """Returns a copy moved by a 4x4 homogeneous transform with a proper rotation part."""
        matrix = np.asarray(matrix, dtype=float)
        vertices = self.vertices @ matrix[:3, :3].T + matrix[:3, 3]
        return TriangleMesh(vertices, self.faces)

    def to_trimesh(self) -> trimesh.Trimesh:
        return trimesh.Trimesh(vertices=np.array(self.vertices), faces=np.array(self.faces), process=False)

@dataclass(frozen=True, eq=False)
class Spoke():
    """A straight interior segment from a skeletal point to the boundary."""

    tail:np.ndarray
    """The skeletal point p."""

    direction:np.ndarray
    """The unit direction u."""

    length:float
    """The spoke length r."""

    def __post_init__(self):
        if not self.length > 0:
            raise MeshError(f'Spoke length must be positive, got {self.length}')
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise MeshError('Spoke direction must be a unit vector')

    @property
    def tip(self) -> np.ndarray:
        return np.asarray(self.tail) + self.length * np.asarray(self.direction)

class RayHit(NamedTuple):
    point:np.ndarray
    face:int
    t:float

class VoxelGrid(NamedTuple):
    """A regular grid of sample points origin + i*spacing[0]*axes[0] + j*spacing[1]*axes[1] + k*spacing[2]*axes[2]."""
    origin:np.ndarray
    axes:np.ndarray
    spacing:np.ndarray
    shape:tuple

    def points(self) -> np.ndarray:
        """Returns the world positions of all grid points in C order of the index triple, (prod(shape), dims)."""
        index = np.indices(self.shape).reshape(len(self.shape), -1).T
        return self.origin + (index * self.spacing) @ self.axes

def load_mesh(path:str, format:Optional[MeshFormat]=None) -> TriangleMesh:
    """Reads an OBJ or PLY triangle mesh.  The format defaults to the file suffix."""
    if not os.path.exists(path):
        raise MeshError(f'File does not exist: {path}')
    fmt = _format_for(path, format)
    try:
        loaded = trimesh.load(path, file_type=fmt.value, force='mesh', process=False)
    except Exception as err:
        raise MeshError(f'Could not parse {path}: {err}') from err
    if not isinstance(loaded, trimesh.Trimesh) or len(loaded.faces) == 0:
        raise MeshError(f'No triangles found in {path}')
    logger.debug('Loaded %s: %d vertices, %d faces', path, len(loaded.vertices), len(loaded.faces))
    return TriangleMesh(loaded.vertices, loaded.faces)

def save_mesh(mesh:TriangleMesh, path:str, format:Optional[MeshFormat]=None, binary:bool=True) -> None:
    """Writes a mesh as OBJ or (binary little-endian or ASCII) PLY."""
    fmt = _format_for(path, format)
    match fmt:
        case MeshFormat.PLY:
            mesh.to_trimesh().export(path, file_type='ply', encoding='binary' if binary else 'ascii')
        case MeshFormat.OBJ:
            mesh.to_trimesh().export(path, file_type='obj', include_normals=False, digits=15)

def _format_for(path:str, format:Optional[MeshFormat]) -> MeshFormat:
    if format is not None:
        return MeshFormat(format)
    suffix = os.path.splitext(path)[1].lower().lstrip('.')
    try:
        return MeshFormat(suffix)
    except ValueError:
        raise MeshError(f'Unsupported mesh format: {path}') from None

def geodesic_distances(mesh:TriangleMesh, sources:Iterable[int], refine:bool=False) -> np.ndarray:
    """
    Returns shortest-path distances along the mesh edge graph from each source vertex to every vertex,
    as a (len(sources), V) array.

    With refine, every face also contributes its edge midpoints and medians as graph nodes and edges,
    which tightens the approximation of surface geodesics across faces.
    """
    if isinstance(sources, (set, frozenset)):
        sources = sorted(sources)
    sources = np.atleast_1d(np.asarray(sources, dtype=np.int64))
    if sources.size == 0:
        raise MeshError('At least one source vertex is required')
    graph = _refined_graph(mesh) if refine else mesh.adjacency
    distances = dijkstra(graph, directed=False, indices=sources)[:, :mesh.vertex_count]
    if not np.isfinite(distances).all():
        raise MeshError('Mesh edge graph is disconnected')
    return distances

def _refined_graph(mesh:TriangleMesh) -> csr_matrix:
    n = mesh.vertex_count
    midpoints = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    points = np.vstack([mesh.vertices, midpoints])
    rows = []
    cols = []

    # vertex to the midpoints of its own edges
    edge_nodes = n + np.arange(len(mesh.edges))
    rows += [mesh.edges[:, 0], mesh.edges[:, 1]]
    cols += [edge_nodes, edge_nodes]

    # within each face: midpoints to each other and vertices to the opposite midpoint
    fe = n + mesh.face_edges
    f = mesh.faces
    rows += [fe[:, 0], fe[:, 1], fe[:, 2], f[:, 2], f[:, 0], f[:, 1]]
    cols += [fe[:, 1], fe[:, 2], fe[:, 0], fe[:, 0], fe[:, 1], fe[:, 2]]

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    weights = np.linalg.norm(points[rows] - points[cols], axis=1)
    size = len(points)
    graph = coo_matrix((np.concatenate([weights, weights]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(size, size))
    return graph.tocsr()

def _moller_trumbore(origin:np.ndarray, direction:np.ndarray, triangles:np.ndarray, eps:float):
    """Returns (t, hit mask) of one ray against (k, 3, 3) triangles, two-sided."""
    v0 = triangles[:, 0]
    e1 = triangles[:, 1] - v0
    e2 = triangles[:, 2] - v0
    p = np.cross(direction, e2)
    det = np.einsum('ij,ij->i', e1, p)
    valid = np.abs(det) > 1e-15
    inv_det = np.divide(1.0, det, out=np.zeros_like(det), where=valid)
    s = origin - v0
    u = np.einsum('ij,ij->i', s, p) * inv_det
    q = np.cross(s, e1)
    v = (q @ direction) * inv_det
    t = np.einsum('ij,ij->i', e2, q) * inv_det
    hit = valid & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > eps)
    return t, hit

def ray_intersect(mesh:TriangleMesh, origin, direction, faces:Optional[np.ndarray]=None, eps:Optional[float]=None) -> Optional[RayHit]:
    """
    Returns the nearest intersection of the ray origin + t*direction (t > eps) with the mesh, or None.

    faces optionally restricts the test to a subset of face indices.
    """
    origin = np.asarray(origin, dtype=float)
    direction = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(direction) - 1.0) > 1e-9:
        raise MeshError('Ray direction must be a unit vector')
    if eps is None:
        eps = 1e-9 * mesh.bbox_diagonal
    candidates = np.arange(mesh.face_count) if faces is None else np.asarray(faces, dtype=np.int64)
    if len(candidates) == 0:
        return None
    t, hit = _moller_trumbore(origin, direction, mesh.vertices[mesh.faces[candidates]], eps)
    if not hit.any():
        return None
    best = np.flatnonzero(hit)[np.argmin(t[hit])]
    return RayHit(origin + t[best] * direction, int(candidates[best]), float(t[best]))

_PARITY_DIRECTIONS = unit(np.array([
    [1.0, 0.0137, 0.0071],
    [0.0093, 1.0, 0.0151],
    [0.0113, 0.0059, 1.0],
]))

def contains(mesh:TriangleMesh, points:np.ndarray) -> np.ndarray:
    """
    Returns a boolean mask of the points inside the mesh by ray parity along three jittered directions,
    with a majority vote.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    triangles = mesh.vertices[mesh.faces]
    v0 = triangles[:, 0]
    e1 = triangles[:, 1] - v0
    e2 = triangles[:, 2] - v0
    chunk = max(1, 2_000_000 // mesh.face_count)
    votes = np.zeros(len(points), dtype=int)
    for direction in _PARITY_DIRECTIONS:
        p = np.cross(direction, e2)
        det = np.einsum('ij,ij->i', e1, p)
        valid = np.abs(det) > 1e-15
        inv_det = np.divide(1.0, det, out=np.zeros_like(det), where=valid)
        for start in range(0, len(points), chunk):
            s = points[start:start + chunk, None, :] - v0[None, :, :]
            u = np.einsum('nij,ij->ni', s, p) * inv_det
            q = np.cross(s, e1[None, :, :])
            v = (q @ direction) * inv_det
            t = np.einsum('ij,nij->ni', e2, q) * inv_det
            crossings = (valid & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0) & (t > 0.0)).sum(axis=1)
            votes[start:start + chunk] += crossings % 2
    return votes >= 2

def principal_grid(points:np.ndarray, pitch:float, margin:float=0.0) -> VoxelGrid:
    """
    Returns a grid of the given pitch aligned with the principal axes of points and centered on their
    centroid, with a symmetric index range covering the points plus margin.
    """
    points = np.asarray(points, dtype=float)
    centroid, axes, _ = principal_axes(points)
    local = (points - centroid) @ axes.T
    half_counts = np.ceil((np.abs(local).max(axis=0) + margin) / pitch).astype(int)
    spacing = np.full(points.shape[1], float(pitch))
    origin = centroid - (half_counts * spacing) @ axes
    return VoxelGrid(origin, axes, spacing, tuple(int(h) for h in 2 * half_counts + 1))

class TriangleSoup(NamedTuple):
    """Triangles that need not form a valid mesh, such as a mesh whose vertices were moved onto fewer points."""
    vertices:np.ndarray
    faces:np.ndarray

    @property
    def signed_volume(self) -> float:
        v = self.vertices[self.faces]
        return float(np.einsum('ij,ij->i', v[:, 0], np.cross(v[:, 1], v[:, 2])).sum() / 6.0)

    @property
    def bbox_diagonal(self) -> float:
        return float(np.linalg.norm(self.vertices.max(axis=0) - self.vertices.min(axis=0)))

def voxelize(mesh, grid:VoxelGrid) -> np.ndarray:
    """
    Returns a boolean array of grid.shape, true for grid points inside the mesh.

    Rays run along each of the three grid axes through every grid row and each ray direction votes with the
    winding number of the surface around the point; a point is inside for a direction when its winding
    number is nonzero and the majority wins.  Overlapping copies of a face add up instead of cancelling,
    so a TriangleSoup with repeated faces voxelizes like the surface it covers.  Rows are offset by a small
    per-axis jitter so no row passes exactly through a mesh edge.
    """
    local = ((mesh.vertices - grid.origin) @ grid.axes.T) / grid.spacing
    triangles = local[mesh.faces]
    shape = np.array(grid.shape)
    jitter = np.array([3.1e-7, 5.3e-7, 7.7e-7])
    handedness = np.sign(np.linalg.det(grid.axes)) or 1.0
    votes = np.zeros(grid.shape, dtype=int)
    for a in range(3):
        b, c = [k for k in range(3) if k != a]
        winding = _scanline_winding(triangles, a, b, c, shape, jitter) * (1.0 if a != 1 else -1.0) * handedness
        votes += np.transpose(winding != 0, np.argsort([b, c, a]))
    return votes >= 2

def _scanline_winding(triangles:np.ndarray, a:int, b:int, c:int, shape:np.ndarray, jitter:np.ndarray) -> np.ndarray:
    """
    Returns the signed count of crossings, shaped (shape[b], shape[c], shape[a]), of rays along +a from every
    grid point.  A crossing counts +1 where the (b, c) winding of the triangle is counterclockwise.
    """
    nb, nc, na = shape[b], shape[c], shape[a]
    pb = triangles[:, :, b] - jitter[b]
    pc = triangles[:, :, c] - jitter[c]
    pa = triangles[:, :, a]
    lo_b = np.clip(np.ceil(pb.min(axis=1)), 0, nb).astype(int)
    hi_b = np.clip(np.floor(pb.max(axis=1)), -1, nb - 1).astype(int)
    lo_c = np.clip(np.ceil(pc.min(axis=1)), 0, nc).astype(int)
    hi_c = np.clip(np.floor(pc.max(axis=1)), -1, nc - 1).astype(int)
    area = (pb[:, 1] - pb[:, 0]) * (pc[:, 2] - pc[:, 0]) - (pb[:, 2] - pb[:, 0]) * (pc[:, 1] - pc[:, 0])

    rows = []
    hits = []
    signs = []
    for f in np.flatnonzero((hi_b >= lo_b) & (hi_c >= lo_c) & (np.abs(area) > 1e-14)):
        jb, jc = np.meshgrid(np.arange(lo_b[f], hi_b[f] + 1), np.arange(lo_c[f], hi_c[f] + 1), indexing='ij')
        jb = jb.ravel()
        jc = jc.ravel()
        db = jb - pb[f, 0]
        dc = jc - pc[f, 0]
        l1 = (db * (pc[f, 2] - pc[f, 0]) - dc * (pb[f, 2] - pb[f, 0])) / area[f]
        l2 = ((pb[f, 1] - pb[f, 0]) * dc - (pc[f, 1] - pc[f, 0]) * db) / area[f]
        l0 = 1.0 - l1 - l2
        inside = (l0 >= 0) & (l1 >= 0) & (l2 >= 0)
        if inside.any():
            rows.append(jb[inside] * nc + jc[inside])
            hits.append(l0[inside] * pa[f, 0] + l1[inside] * pa[f, 1] + l2[inside] * pa[f, 2])
            signs.append(np.full(int(inside.sum()), 1 if area[f] > 0 else -1))

    counts = np.zeros((nb * nc, na + 1), dtype=int)
    if rows:
        rows = np.concatenate(rows)
        signs = np.concatenate(signs)
        ends = np.clip(np.ceil(np.concatenate(hits)), 0, na).astype(int)
        np.add.at(counts, (rows, np.zeros_like(rows)), signs)
        np.add.at(counts, (rows, ends), -signs)
    return np.cumsum(counts[:, :na], axis=1).reshape(nb, nc, na)

def jaccard_volume(a, b, resolution:int=128) -> float:
    """
    Returns |A ∩ B| / |A ∪ B| of the solids bounded by two meshes (or triangle soups), estimated on a voxel
    grid with resolution cells per axis over their joint bounding box in the principal frame of both vertex
    sets.
    """
    if resolution < 16:
        raise MeshError(f'Voxel resolution must be at least 16, got {resolution}')
    for mesh in (a, b):
        if not abs(mesh.signed_volume) > 1e-12 * mesh.bbox_diagonal ** 3:
            raise MeshError('Cannot compute volume overlap of a zero-volume mesh')

    points = np.vstack([a.vertices, b.vertices])
    points = points[np.lexsort(points.T[::-1])]
    centroid, axes, _ = principal_axes(points)
    local = (points - centroid) @ axes.T
    lo = local.min(axis=0)
    spacing = (local.max(axis=0) - lo) / resolution
    grid = VoxelGrid(centroid + (lo + 0.5 * spacing) @ axes, axes, spacing, (resolution,) * 3)

    inside_a = voxelize(a, grid)
    inside_b = voxelize(b, grid)
    union = np.count_nonzero(inside_a | inside_b)
    if union == 0:
        raise MeshError('Voxelization found no interior cells; increase the resolution')
    return float(np.count_nonzero(inside_a & inside_b) / union)
