from dataclasses import dataclass, field
from functools import cached_property
import logging
from typing import List, Optional

import numpy as np
from scipy.interpolate import LinearNDInterpolator, NearestNDInterpolator
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components
from scipy.spatial import cKDTree

from .modes import FlatteningMethod
from .util import principal_axes, unit

logger = logging.getLogger(__name__)

SEMI_FLAT_THRESHOLD = 0.01
CURVATURE_NEIGHBORS = 12
INJECTIVITY_FRACTION = 1e-3

EXAGGERATION = 12.0
EXAGGERATION_ITERATIONS = 250
MAX_TSNE_SAMPLES = 5000

class FlatteningError(ValueError):
    """Raised when a sheet cannot be measured or flattened."""
    pass

@dataclass(eq=False)
class FlatteningMap():
    """A correspondence between 3D sheet samples and their 2D images."""

    method:FlatteningMethod

    samples:np.ndarray
    """The 3D sheet samples, (n, 3)."""

    coords:np.ndarray
    """The 2D image of each sample, (n, 2)."""

    flatable:bool
    """True when the map is injective on the samples with no orientation flips."""

    irregularity:float = float('nan')

    centroid:Optional[np.ndarray] = None
    axes:Optional[np.ndarray] = None
    """For PCA maps, the rows are the first, second and third principal axes."""

    kl:List[float] = field(default_factory=list)
    """For t-SNE maps, the KL divergence after every iteration."""

    @property
    def semi_flat(self) -> bool:
        return self.irregularity < SEMI_FLAT_THRESHOLD

    @property
    def treatable(self) -> bool:
        """An irregular sheet that still flattens injectively by t-SNE."""
        return self.method == FlatteningMethod.TSNE and self.flatable

    @property
    def heights(self) -> np.ndarray:
        """Third-axis coordinates of the samples (PCA maps only)."""
        return (self.samples - self.centroid) @ self.axes[2]

    def project(self, points:np.ndarray) -> np.ndarray:
        """Returns 2D images of arbitrary 3D points near the sheet."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.method == FlatteningMethod.PCA:
            return (points - self.centroid) @ self.axes[:2].T
        _, nearest = cKDTree(self.samples).query(points)
        return self.coords[nearest]

    def lift(self, coords:np.ndarray) -> np.ndarray:
        """
        Returns 3D sheet points for 2D coordinates by piecewise-linear interpolation over the triangulated
        image, falling back to the nearest sample outside its convex hull.
        """
        coords = np.atleast_2d(np.asarray(coords, dtype=float))
        linear, nearest = self._interpolators
        values = linear(coords)
        missing = np.isnan(values).reshape(len(coords), -1).any(axis=1)
        if missing.any():
            values[missing] = nearest(coords[missing])
        if self.method == FlatteningMethod.PCA:
            return self.centroid + coords @ self.axes[:2] + values[:, None] * self.axes[2]
        return values

    @cached_property
    def _interpolators(self):
        values = self.heights if self.method == FlatteningMethod.PCA else self.samples
        return LinearNDInterpolator(self.coords, values), NearestNDInterpolator(self.coords, values)

def principal_curvatures(samples:np.ndarray, neighbors:int=CURVATURE_NEIGHBORS) -> np.ndarray:
    """
    Returns the two principal curvatures at every sample, (n, 2), from a least-squares quadric
    h = a x^2 + b xy + c y^2 + d x + e y + f fitted to the sample and its nearest neighbors in their local
    principal frame.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) <= neighbors:
        raise FlatteningError(f'Need more than {neighbors} samples to estimate curvature, got {len(samples)}')
    _, index = cKDTree(samples).query(samples, k=neighbors + 1)
    local = samples[index] - samples[:, None, :]

    _, singular, vt = np.linalg.svd(local - local.mean(axis=1, keepdims=True), full_matrices=False)
    if (singular[:, 1] <= 1e-9 * np.maximum(singular[:, 0], 1e-300)).any():
        raise FlatteningError('Degenerate neighborhood: collinear samples')
    x = np.einsum('nkd,nd->nk', local, vt[:, 0])
    y = np.einsum('nkd,nd->nk', local, vt[:, 1])
    h = np.einsum('nkd,nd->nk', local, vt[:, 2])

    design = np.stack([x * x, x * y, y * y, x, y, np.ones_like(x)], axis=2)
    coef = np.einsum('nij,nj->ni', np.linalg.pinv(design), h)
    fx, fy = coef[:, 3], coef[:, 4]
    fxx, fxy, fyy = 2 * coef[:, 0], coef[:, 1], 2 * coef[:, 2]

    w = np.sqrt(1 + fx ** 2 + fy ** 2)
    first = np.stack([np.stack([1 + fx ** 2, fx * fy], -1), np.stack([fx * fy, 1 + fy ** 2], -1)], axis=1)
    second = np.stack([np.stack([fxx, fxy], -1), np.stack([fxy, fyy], -1)], axis=1) / w[:, None, None]
    shape_operator = np.linalg.solve(first, second)
    return np.sort(np.real(np.linalg.eigvals(shape_operator)), axis=1)

def irregularity(samples:np.ndarray, neighbors:int=CURVATURE_NEIGHBORS) -> float:
    """
    Returns 2 arctan(max kappa_p) / pi, where kappa_p is the mean absolute principal curvature at sample p.
    A plane scores 0 and a unit sphere 0.5.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 30:
        raise FlatteningError(f'Need at least 30 samples, got {len(samples)}')
    kappa = np.abs(principal_curvatures(samples, neighbors)).mean(axis=1)
    return float(2.0 * np.arctan(kappa.max()) / np.pi)

def pca_flatten(samples:np.ndarray, up:Optional[np.ndarray]=None, triangles:Optional[np.ndarray]=None, measure:bool=True) -> FlatteningMap:
    """
    Projects the samples orthogonally onto their first principal plane.

    The map is flatable when it is injective on the samples (no two samples within eps in 2D while farther
    than 3 eps apart in 3D, with eps a thousandth of the bounding-box diagonal) and no local orientation
    flips: triangles, when given, must keep one sign of projected area; otherwise consistently propagated
    local normals must keep one side of the third axis.
    """
    samples = np.asarray(samples, dtype=float)
    if len(samples) < 3:
        raise FlatteningError('Need at least three samples')
    centroid, axes, variances = principal_axes(samples, up)
    if variances[1] <= 1e-12 * variances[0]:
        raise FlatteningError('Samples are collinear; the covariance is rank deficient')

    coords = (samples - centroid) @ axes[:2].T
    diagonal = float(np.linalg.norm(samples.max(axis=0) - samples.min(axis=0)))
    flatable = _injective(samples, coords, INJECTIVITY_FRACTION * diagonal)
    if flatable:
        if triangles is not None:
            flatable = _triangles_keep_orientation(coords, np.asarray(triangles))
        elif len(samples) > CURVATURE_NEIGHBORS:
            flatable = _normals_keep_side(samples, axes[2])

    level = irregularity(samples) if measure and len(samples) >= 30 else float('nan')
    logger.info('PCA flattening of %d samples: flatable=%s, irregularity=%.4f', len(samples), flatable, level)
    return FlatteningMap(FlatteningMethod.PCA, samples, coords, flatable, level, centroid, axes)

def _injective(samples:np.ndarray, coords:np.ndarray, eps:float) -> bool:
    pairs = cKDTree(coords).query_pairs(eps, output_type='ndarray')
    if len(pairs) == 0:
        return True
    apart = np.linalg.norm(samples[pairs[:, 0]] - samples[pairs[:, 1]], axis=1)
    return not (apart > 3.0 * eps).any()

def _triangles_keep_orientation(coords:np.ndarray, triangles:np.ndarray) -> bool:
    t = coords[triangles]
    area = (t[:, 1, 0] - t[:, 0, 0]) * (t[:, 2, 1] - t[:, 0, 1]) - (t[:, 2, 0] - t[:, 0, 0]) * (t[:, 1, 1] - t[:, 0, 1])
    scale = 1e-12 * max(float(np.abs(area).max()), 1e-300)
    return not ((area > scale).any() and (area < -scale).any())

def oriented_normals(samples:np.ndarray, neighbors:int=CURVATURE_NEIGHBORS) -> np.ndarray:
    """
    Returns unit local-PCA normals of a sheet sampled by points, flipped so that neighbors agree, by
    breadth-first propagation over the nearest-neighbor graph from sample 0 of each component.
    """
    _, index = cKDTree(samples).query(samples, k=neighbors + 1)
    local = samples[index] - samples[index].mean(axis=1, keepdims=True)
    normals = np.linalg.svd(local, full_matrices=False)[2][:, 2]

    n = len(samples)
    rows = np.repeat(np.arange(n), neighbors)
    graph = coo_matrix((np.ones(len(rows)), (rows, index[:, 1:].ravel())), shape=(n, n)).tocsr()
    graph = graph + graph.T
    count, component = connected_components(graph, directed=False)
    for c in range(count):
        start = int(np.flatnonzero(component == c)[0])
        order, predecessors = breadth_first_order(graph, start, directed=False)
        for node in order[1:]:
            if np.dot(normals[node], normals[predecessors[node]]) < 0:
                normals[node] = -normals[node]
    return unit(normals)

def _normals_keep_side(samples:np.ndarray, axis:np.ndarray) -> bool:
    side = oriented_normals(samples) @ axis
    return not ((side > 1e-6).any() and (side < -1e-6).any())

def joint_probabilities(squared:np.ndarray, perplexity:float, tol:float=1e-5, max_steps:int=200) -> np.ndarray:
    """Returns the symmetrized t-SNE input affinities from squared distances, matching the perplexity row by row."""
    n = len(squared)
    target = np.log(perplexity)
    conditional = np.zeros((n, n))
    for i in range(n):
        d = np.delete(squared[i], i)
        d = d - d.min()
        beta, lo, hi = 1.0, 0.0, np.inf
        for _ in range(max_steps):
            weights = np.exp(-d * beta)
            total = weights.sum()
            p = weights / total
            entropy = np.log(total) + beta * np.dot(d, p)
            if abs(entropy - target) < tol:
                break
            if entropy > target:
                lo = beta
                beta = beta * 2.0 if np.isinf(hi) else 0.5 * (beta + hi)
            else:
                hi = beta
                beta = 0.5 * (beta + lo)
        else:
            raise FlatteningError(f'Perplexity search did not converge for sample {i}')
        conditional[i, np.arange(n) != i] = p
    joint = (conditional + conditional.T) / (2.0 * n)
    return np.maximum(joint, 1e-12)

def tsne_flatten(samples:np.ndarray, perplexity:float=30.0, iterations:int=1000, seed:int=0) -> FlatteningMap:
    """
    Embeds the samples in 2D with exact t-SNE.

    The optimizer uses momentum 0.5 then 0.8, per-coordinate gains, early exaggeration 12 for the first 250
    iterations and a learning rate of n/12.  The KL divergence against the unexaggerated affinities is
    recorded after every iteration.
    """
    samples = np.asarray(samples, dtype=float)
    n = len(samples)
    if n > MAX_TSNE_SAMPLES:
        raise FlatteningError(f'Exact t-SNE handles at most {MAX_TSNE_SAMPLES} samples, got {n}')
    if not 0 < perplexity < n / 3.0:
        raise FlatteningError(f'Perplexity must be in (0, n/3) = (0, {n / 3.0:g}), got {perplexity}')

    squared = np.sum((samples[:, None, :] - samples[None, :, :]) ** 2, axis=2)
    p = joint_probabilities(squared, perplexity)
    np.fill_diagonal(p, 0.0)

    rng = np.random.default_rng(seed)
    y = rng.normal(0.0, 1e-2, size=(n, 2))
    update = np.zeros_like(y)
    gains = np.ones_like(y)
    rate = n / 12.0
    history = []
    for it in range(iterations):
        early = it < EXAGGERATION_ITERATIONS
        exaggeration = EXAGGERATION if early else 1.0
        momentum = 0.5 if early else 0.8

        diff = y[:, None, :] - y[None, :, :]
        kernel = 1.0 / (1.0 + np.sum(diff ** 2, axis=2))
        np.fill_diagonal(kernel, 0.0)
        q = np.maximum(kernel / kernel.sum(), 1e-12)
        grad = 4.0 * np.einsum('ij,ijk->ik', (exaggeration * p - q) * kernel, diff)

        same = np.sign(grad) == np.sign(update)
        gains = np.maximum(np.where(same, gains * 0.8, gains + 0.2), 0.01)
        update = momentum * update - rate * gains * grad
        y = y + update
        y = y - y.mean(axis=0)

        off = ~np.eye(n, dtype=bool)
        history.append(float(np.sum(p[off] * np.log(p[off] / q[off]))))
        if (it + 1) % 100 == 0:
            logger.debug('t-SNE iteration %d: KL %.6f', it + 1, history[-1])

    diagonal = float(np.linalg.norm(y.max(axis=0) - y.min(axis=0)))
    flatable = _injective_in_image(samples, y, INJECTIVITY_FRACTION * diagonal)
    logger.info('t-SNE flattening of %d samples: KL %.4f, injective=%s', n, history[-1] if history else float('nan'), flatable)
    return FlatteningMap(FlatteningMethod.TSNE, samples, y, flatable, kl=history)

def _injective_in_image(samples:np.ndarray, coords:np.ndarray, eps:float) -> bool:
    """Two samples landing within eps of each other in the image must be nearest-neighbor close in 3D."""
    pairs = cKDTree(coords).query_pairs(eps, output_type='ndarray')
    if len(pairs) == 0:
        return True
    spacing = cKDTree(samples).query(samples, k=2)[0][:, 1]
    apart = np.linalg.norm(samples[pairs[:, 0]] - samples[pairs[:, 1]], axis=1)
    return not (apart > 3.0 * np.maximum(spacing[pairs[:, 0]], spacing[pairs[:, 1]])).any()

def flatten_sheet(samples:np.ndarray, up:Optional[np.ndarray]=None, method:Optional[FlatteningMethod]=None, perplexity:float=30.0, iterations:int=1000, seed:int=0) -> FlatteningMap:
    """
    Flattens by PCA when the sheet is PCA-flatable, otherwise by t-SNE.  A forced method skips the
    decision.  Raises FlatteningError when neither map is injective.
    """
    if method is not None and FlatteningMethod(method) == FlatteningMethod.TSNE:
        flat = tsne_flatten(samples, perplexity, iterations, seed)
    else:
        flat = pca_flatten(samples, up)
        if flat.flatable or method is not None:
            return flat
        logger.info('Sheet is not PCA-flatable (irregularity %.4f); trying t-SNE', flat.irregularity)
        level = flat.irregularity
        flat = tsne_flatten(samples, perplexity, iterations, seed)
        flat.irregularity = level
    if not flat.flatable:
        raise FlatteningError('Sheet is neither PCA-flatable nor treatable by t-SNE')
    if np.isnan(flat.irregularity) and len(samples) >= 30:
        flat.irregularity = irregularity(samples)
    return flat
