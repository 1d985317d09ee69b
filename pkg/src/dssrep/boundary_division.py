import csv
from dataclasses import dataclass
from enum import IntEnum
import json
import logging
import os
from typing import Iterable, List, Tuple
import warnings

import numpy as np
from scipy.linalg import eigh
from scipy.sparse import coo_matrix, csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .mesh_core import TriangleMesh, geodesic_distances
from .modes import AffinityVariant
from .util import principal_axes, unit

logger = logging.getLogger(__name__)

DENSE_LIMIT = 3000
"""Largest affinity matrix solved with a dense eigensolver."""

class Part(IntEnum):
    TOP    = 1
    BOTTOM = -1

class DivisionError(ValueError):
    """Raised when a boundary cannot be split into a top and a bottom part separated by one crest loop."""
    pass

class IslandWarning(UserWarning):
    """Used to warn when stray label islands were relabelled to the surrounding part."""
    pass

@dataclass(eq=False)
class BoundaryDivision():
    """Top/bottom labels of the mesh vertices and the crest loop between the two parts."""

    labels:np.ndarray
    """Per-vertex Part values (+1 top, -1 bottom)."""

    crest:np.ndarray
    """Ordered closed loop of top vertices adjacent to the bottom part, counter-clockwise seen from above."""

    delta:float
    """The affinity penalization parameter."""

    variant:AffinityVariant = AffinityVariant.LITERAL

    @property
    def top(self) -> np.ndarray:
        return self.labels == Part.TOP

    @property
    def bottom(self) -> np.ndarray:
        return self.labels == Part.BOTTOM

    def part_faces(self, mesh:TriangleMesh, part:Part) -> np.ndarray:
        """Returns the indices of the faces whose three vertices all carry the given label."""
        return np.flatnonzero((self.labels[mesh.faces] == part).all(axis=1))

    def swapped(self) -> 'BoundaryDivision':
        return BoundaryDivision(-self.labels, self.crest, self.delta, self.variant)

    @classmethod
    def from_labels(cls, mesh:TriangleMesh, labels, delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL) -> 'BoundaryDivision':
        """Validates externally supplied labels and extracts their crest."""
        labels = _check_labels(labels, mesh.vertex_count)
        for part in Part:
            mask = labels == part
            count, _ = connected_components(mesh.adjacency[mask][:, mask], directed=False)
            if count != 1:
                raise DivisionError(f'The {part.name.lower()} part has {count} connected components')
        return cls(labels, extract_crest(mesh, labels), float(delta), AffinityVariant(variant))

def divide_boundary(mesh:TriangleMesh, delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL, max_vertices:int=DENSE_LIMIT) -> BoundaryDivision:
    """
    Splits the mesh boundary into top and bottom parts by the sign of the Fiedler vector of the normalized
    Laplacian of the normal/geodesic affinity, then extracts the crest.

    Meshes larger than max_vertices are divided on a farthest-point subsample; every other vertex takes the
    label of its geodesically nearest sample.
    """
    if not delta > 0:
        raise DivisionError(f'delta must be positive, got {delta}')
    variant = AffinityVariant(variant)

    if mesh.vertex_count > max_vertices:
        samples = farthest_point_samples(mesh.vertices, max_vertices)
    else:
        samples = np.arange(mesh.vertex_count)
    logger.info('Dividing boundary on %d of %d vertices (delta=%s, %s)', len(samples), mesh.vertex_count, delta, variant.value)

    distances = geodesic_distances(mesh, samples)[:, samples]
    affinity = spectral_affinity(mesh.vertex_normals[samples], distances, delta, variant)
    sample_labels = np.where(fiedler_vector(affinity) > 0, Part.TOP, Part.BOTTOM).astype(np.int8)

    if len(samples) < mesh.vertex_count:
        _, _, nearest = dijkstra(mesh.adjacency, directed=False, indices=samples, min_only=True, return_predecessors=True)
        by_vertex = np.zeros(mesh.vertex_count, dtype=np.int8)
        by_vertex[samples] = sample_labels
        labels = by_vertex[nearest]
    else:
        labels = sample_labels

    labels = remove_islands(mesh.adjacency, labels)
    labels = _canonical_naming(mesh.vertices, labels)
    return BoundaryDivision(labels, extract_crest(mesh, labels), float(delta), variant)

def spectral_affinity(normals:np.ndarray, distances:np.ndarray, delta:float, variant:AffinityVariant=AffinityVariant.LITERAL) -> np.ndarray:
    """
    Returns the affinity matrix of unit normals and pairwise geodesic distances.

    Distances are normalized by their maximum.  The literal variant is exp(delta <n_i, n_j> d_ij); the
    decaying variant is exp(-delta (1 - <n_i, n_j>) d_ij).
    """
    largest = distances.max()
    if not largest > 0:
        raise DivisionError('Geodesic distances are all zero')
    d = distances / largest
    cosines = np.clip(normals @ normals.T, -1.0, 1.0)
    match AffinityVariant(variant):
        case AffinityVariant.LITERAL:
            return np.exp(delta * cosines * d)
        case AffinityVariant.DECAYING:
            return np.exp(-delta * (1.0 - cosines) * d)

def fiedler_vector(affinity:np.ndarray) -> np.ndarray:
    """Returns the eigenvector of the second-smallest eigenvalue of I - D^-1/2 W D^-1/2."""
    scale = 1.0 / np.sqrt(affinity.sum(axis=1))
    laplacian = np.eye(len(affinity)) - scale[:, None] * affinity * scale[None, :]
    laplacian = 0.5 * (laplacian + laplacian.T)
    if len(affinity) <= DENSE_LIMIT:
        _, vectors = eigh(laplacian, subset_by_index=[0, 1])
        return vectors[:, 1]
    try:
        values, vectors = eigsh(laplacian, k=2, which='SA', tol=1e-10, maxiter=10 * len(affinity))
    except ArpackNoConvergence as err:
        raise DivisionError(f'Eigensolver did not converge: {err}') from err
    return vectors[:, np.argsort(values)[1]]

def farthest_point_samples(points:np.ndarray, count:int) -> np.ndarray:
    """Returns count indices of points chosen by farthest-point sampling, starting from the point farthest from the centroid."""
    points = np.asarray(points, dtype=float)
    chosen = [int(np.argmax(np.linalg.norm(points - points.mean(axis=0), axis=1)))]
    nearest = np.linalg.norm(points - points[chosen[0]], axis=1)
    for _ in range(1, min(count, len(points))):
        chosen.append(int(np.argmax(nearest)))
        nearest = np.minimum(nearest, np.linalg.norm(points - points[chosen[-1]], axis=1))
    return np.sort(np.array(chosen))

def remove_islands(graph:csr_matrix, labels:np.ndarray, max_rounds:int=10) -> np.ndarray:
    """
    Relabels every connected component of a label class other than its largest to the opposite class, until
    each class is a single component.
    """
    labels = np.array(labels, dtype=np.int8)
    for _ in range(max_rounds):
        changed = False
        for part in Part:
            members = np.flatnonzero(labels == part)
            if len(members) == 0:
                raise DivisionError(f'The {part.name.lower()} part is empty')
            count, component = connected_components(graph[members][:, members], directed=False)
            if count > 1:
                sizes = np.bincount(component)
                strays = members[component != np.argmax(sizes)]
                warnings.warn(f'Relabelled {len(strays)} vertices in {count - 1} stray {part.name.lower()} island(s).', IslandWarning)
                labels[strays] = -part
                changed = True
        if not changed:
            return labels
    raise DivisionError('Label islands did not settle')

def _canonical_naming(points:np.ndarray, labels:np.ndarray) -> np.ndarray:
    centroid, axes, _ = principal_axes(points)
    heights = (points - centroid) @ axes[-1]
    if heights[labels == Part.TOP].mean() < heights[labels == Part.BOTTOM].mean():
        return -labels
    return labels

def _check_labels(labels, count:int) -> np.ndarray:
    labels = np.asarray(labels).astype(np.int8)
    if labels.shape != (count,):
        raise DivisionError(f'Expected {count} labels, got shape {labels.shape}')
    if not np.isin(labels, [Part.TOP, Part.BOTTOM]).all():
        raise DivisionError('Labels must be +1 (top) or -1 (bottom)')
    for part in Part:
        if not (labels == part).any():
            raise DivisionError(f'The {part.name.lower()} part is empty')
    return labels

def extract_crest(mesh:TriangleMesh, labels) -> np.ndarray:
    """
    Returns the crest: top vertices with a bottom neighbor, ordered as one closed loop, starting at the lowest
    vertex index and running counter-clockwise seen from outside the top part.

    The loop is traced through the strip of faces carrying both labels; each such face is entered and left
    through its two top-bottom edges.
    """
    labels = _check_labels(labels, mesh.vertex_count)
    top = labels == Part.TOP
    faces = mesh.faces
    top_count = top[faces].sum(axis=1)
    mixed = np.flatnonzero((top_count > 0) & (top_count < 3))
    if len(mixed) == 0:
        raise DivisionError('Labels do not meet anywhere on the surface')

    ends = [(faces[mixed, k], faces[mixed, (k + 1) % 3]) for k in range(3)]
    crossing = np.stack([top[a] != top[b] for a, b in ends], axis=1)
    edge_ids = mesh.face_edges[mixed]
    faces_by_edge = {}
    for row, face_edges in enumerate(edge_ids):
        for k in np.flatnonzero(crossing[row]):
            faces_by_edge.setdefault(int(face_edges[k]), []).append(row)

    def top_end(row:int, k:int) -> int:
        a = faces[mixed[row], k]
        return int(a if top[a] else faces[mixed[row], (k + 1) % 3])

    def crossing_slots(row:int) -> List[int]:
        return [int(k) for k in np.flatnonzero(crossing[row])]

    start = 0
    slot_in, slot_out = crossing_slots(start)
    walk = []
    visited = 0
    row = start
    while True:
        visited += 1
        walk += [top_end(row, slot_in), top_end(row, slot_out)]
        shared = int(edge_ids[row, slot_out])
        following = [other for other in faces_by_edge[shared] if other != row]
        if len(following) != 1:
            raise DivisionError('Crest strip is not a manifold band')
        row = following[0]
        if row == start:
            break
        slot_in = next(k for k in crossing_slots(row) if int(edge_ids[row, k]) == shared)
        slot_out = next(k for k in crossing_slots(row) if k != slot_in)
        if visited > len(mixed):
            raise DivisionError('Crest walk did not close')

    if visited != len(mixed):
        raise DivisionError('Crest splits into several loops; the object is not slab-like under this division')

    loop = [walk[0]]
    for vertex in walk[1:]:
        if vertex != loop[-1]:
            loop.append(vertex)
    while len(loop) > 1 and loop[-1] == loop[0]:
        loop.pop()
    loop = np.array(loop, dtype=np.int64)

    first = int(np.argmin(loop))
    loop = np.roll(loop, -first)
    points = mesh.vertices[loop]
    vector_area = 0.5 * np.cross(points, np.roll(points, -1, axis=0)).sum(axis=0)
    up = mesh.vertex_normals[top].sum(axis=0)
    if np.dot(vector_area, up) < 0:
        loop = np.concatenate([loop[:1], loop[1:][::-1]])
    return loop

def polygon_normals(points:np.ndarray) -> np.ndarray:
    """Returns outward unit vertex normals of a closed counter-clockwise polygon, averaging the adjacent edge normals by length."""
    edges = np.roll(points, -1, axis=0) - points
    edge_normals = np.stack([edges[:, 1], -edges[:, 0]], axis=1)
    return unit(edge_normals + np.roll(edge_normals, 1, axis=0))

def divide_polygon(points:np.ndarray, delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL) -> np.ndarray:
    """
    Splits a closed counter-clockwise 2D polygon into top and bottom runs of vertices with the same spectral
    rule as divide_boundary.  Geodesics are arclengths along the polygon.  Returns per-vertex Part values.
    """
    points = np.asarray(points, dtype=float)
    if not delta > 0:
        raise DivisionError(f'delta must be positive, got {delta}')
    if len(points) < 4:
        raise DivisionError('A polygon needs at least four vertices to be divided')

    steps = np.linalg.norm(np.roll(points, -1, axis=0) - points, axis=1)
    position = np.concatenate([[0.0], np.cumsum(steps)[:-1]])
    perimeter = steps.sum()
    gap = np.abs(position[:, None] - position[None, :])
    distances = np.minimum(gap, perimeter - gap)

    affinity = spectral_affinity(polygon_normals(points), distances, delta, variant)
    labels = np.where(fiedler_vector(affinity) > 0, Part.TOP, Part.BOTTOM).astype(np.int8)
    labels = remove_islands(_cycle_graph(len(points)), labels)
    return _canonical_naming(points, labels)

def _cycle_graph(count:int) -> csr_matrix:
    rows = np.arange(count)
    cols = (rows + 1) % count
    ones = np.ones(count)
    return coo_matrix((np.concatenate([ones, ones]), (np.concatenate([rows, cols]), np.concatenate([cols, rows]))), shape=(count, count)).tocsr()

def label_agreement(a:np.ndarray, b:np.ndarray) -> float:
    """Returns the fraction of equal labels, allowing a global swap of the names."""
    same = float(np.mean(np.asarray(a) == np.asarray(b)))
    return max(same, 1.0 - same)

def delta_sweep(mesh:TriangleMesh, deltas:Iterable[float], variant:AffinityVariant=AffinityVariant.LITERAL) -> List[Tuple[float, BoundaryDivision, float]]:
    """
    Divides the mesh for each delta and returns (delta, division, agreement) tuples, where agreement compares
    the labels with those of the previous delta (1.0 for the first).
    """
    results = []
    previous = None
    for delta in deltas:
        division = divide_boundary(mesh, delta, variant)
        agreement = 1.0 if previous is None else label_agreement(previous.labels, division.labels)
        results.append((float(delta), division, agreement))
        previous = division
    return results

def write_labels_csv(division:BoundaryDivision, path:str) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['vertex_index', 'label'])
        for index, label in enumerate(division.labels):
            writer.writerow([index, Part(label).name.lower()])

def read_labels_csv(path:str) -> np.ndarray:
    if not os.path.exists(path):
        raise ValueError(f'File does not exist: {path}')
    with open(path, newline='') as f:
        rows = sorted((int(row['vertex_index']), row['label'].strip().upper()) for row in csv.DictReader(f))
    try:
        return np.array([Part[label] for _, label in rows], dtype=np.int8)
    except KeyError as err:
        raise DivisionError(f'Unknown label {err} in {path}') from None

def write_crest_json(division:BoundaryDivision, path:str) -> None:
    with open(path, 'w') as f:
        json.dump({'crest': [int(v) for v in division.crest], 'delta': division.delta, 'variant': division.variant.value}, f, indent=2)
