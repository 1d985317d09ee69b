from typing import Tuple

import numpy as np

def unit(vectors:np.ndarray, axis:int=-1) -> np.ndarray:
    """Returns the vectors scaled to unit length along axis.  Zero vectors stay zero."""
    vectors = np.asarray(vectors, dtype=float)
    norms = np.linalg.norm(vectors, axis=axis, keepdims=True)
    return np.divide(vectors, norms, out=np.zeros_like(vectors), where=norms > 0)

def arclength(points:np.ndarray) -> np.ndarray:
    """Returns the cumulative arclength of a polyline, starting at 0."""
    points = np.asarray(points, dtype=float)
    if len(points) < 2:
        return np.zeros(len(points))
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])

def polyline_length(points:np.ndarray) -> float:
    """Returns the total length of a polyline."""
    return float(arclength(points)[-1]) if len(points) > 1 else 0.0

def point_at(points:np.ndarray, lengths:np.ndarray, at) -> np.ndarray:
    """
    Returns the point(s) of a polyline at the requested arclength(s).

    lengths is the cumulative arclength table of points, as returned by arclength().
    """
    points = np.asarray(points, dtype=float)
    at = np.clip(np.asarray(at, dtype=float), lengths[0], lengths[-1])
    return np.stack([np.interp(at, lengths, points[:, k]) for k in range(points.shape[1])], axis=-1)

def tangents(points:np.ndarray) -> np.ndarray:
    """Returns unit tangents of a polyline by centered differences (one-sided at the ends)."""
    points = np.asarray(points, dtype=float)
    return unit(np.gradient(points, axis=0))

def principal_axes(points:np.ndarray, up:np.ndarray=None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns (centroid, axes, variances) of a point cloud.  The rows of axes are the principal directions
    sorted by decreasing variance and form a right-handed frame.

    The sign of each axis is fixed so that its largest-magnitude component is positive, except for the
    last axis, which points along up when up is given.
    """
    points = np.asarray(points, dtype=float)
    centroid = points.mean(axis=0)
    _, singular, vt = np.linalg.svd(points - centroid, full_matrices=False)
    axes = vt.copy()
    for k in range(len(axes)):
        if axes[k][np.argmax(np.abs(axes[k]))] < 0:
            axes[k] = -axes[k]
    if up is not None and np.dot(axes[-1], up) < 0:
        axes[-1] = -axes[-1]
    if len(axes) == 3:
        axes[1] = np.cross(axes[2], axes[0])
    elif len(axes) == 2 and axes[0, 0] * axes[1, 1] - axes[0, 1] * axes[1, 0] < 0:
        axes[1] = -axes[1]
    variances = singular ** 2 / max(len(points) - 1, 1)
    return centroid, axes, variances

def angle_between(a:np.ndarray, b:np.ndarray) -> float:
    """Returns the angle in radians between two vectors."""
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))

def axis_angle(a:np.ndarray, b:np.ndarray) -> float:
    """Returns the angle between two unit directions folded into the first quadrant, arccos|a.b|."""
    return float(np.arccos(np.clip(abs(np.dot(a, b)), 0.0, 1.0)))

def orthonormal_frame(normal:np.ndarray, tangent:np.ndarray) -> np.ndarray:
    """
    Returns rotation matrices with columns (n, b, n x b) from normals and tangents, (..., 3, 3).

    b is the unit tangent; n is the normal made orthogonal to b by one Gram-Schmidt pass.
    """
    b = unit(tangent)
    normal = np.asarray(normal, dtype=float)
    n = unit(normal - np.sum(normal * b, axis=-1, keepdims=True) * b)
    return np.stack([n, b, np.cross(n, b)], axis=-1)
