from dataclasses import dataclass, field
from functools import cached_property
import logging
from typing import List, NamedTuple, Optional, Tuple
import warnings

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.optimize import brentq
from scipy.spatial import cKDTree

from .boundary_division import Part, divide_polygon
from .cms import extract_cms, polygon_boundary_samples
from .mesh_core import Spoke
from .modes import AffinityVariant
from .util import arclength, principal_axes, unit

logger = logging.getLogger(__name__)

MAX_DEGREE = 7
END_CAP_FRACTION = 0.02
MAX_CONDITION = 1e10

class Gc2dError(ValueError):
    """Raised when a 2D generalized cylinder cannot be fitted."""
    pass

class EndCapWarning(UserWarning):
    """Used to warn when the radius slope reached 1 and was clamped, as happens near the object's vertices."""
    pass

class RccWarning(UserWarning):
    """Used to warn when a station violates the relative curvature condition."""
    pass

def _cross(a:np.ndarray, b:np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]

def _left(v:np.ndarray) -> np.ndarray:
    """Rotates 2D vectors by +90 degrees."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)

@dataclass(eq=False)
class Polygon2D():
    """
    A closed counter-clockwise polygon with optional per-vertex top/bottom labels.

    vertices holds the indices of the two object vertices (Gamma0, Gamma1).  When absent they default to the
    first and last vertex of the bottom run in counter-clockwise order, so that the top part lies to the
    left of the direction from Gamma0 to Gamma1.
    """

    points:np.ndarray
    labels:Optional[np.ndarray] = None
    vertices:Optional[Tuple[int, int]] = None

    def __post_init__(self):
        self.points = np.array(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[1] != 2 or len(self.points) < 3:
            raise Gc2dError(f'A polygon needs at least three 2D points, got shape {self.points.shape}')
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(np.int8)
            if self.labels.shape != (len(self.points),):
                raise Gc2dError('Polygon labels must match its vertices')
        if self.signed_area < 0:
            n = len(self.points)
            self.points = self.points[::-1].copy()
            if self.labels is not None:
                self.labels = self.labels[::-1].copy()
            if self.vertices is not None:
                self.vertices = (n - 1 - self.vertices[1], n - 1 - self.vertices[0])
        if self.vertices is None and self.labels is not None:
            self.vertices = _bottom_run_ends(self.labels)

    @property
    def signed_area(self) -> float:
        return float(0.5 * _cross(self.points, np.roll(self.points, -1, axis=0)).sum())

    @property
    def perimeter(self) -> float:
        return float(np.linalg.norm(np.roll(self.points, -1, axis=0) - self.points, axis=1).sum())

    def with_labels(self, labels:np.ndarray, vertices:Optional[Tuple[int, int]]=None) -> 'Polygon2D':
        return Polygon2D(self.points, labels, vertices)

    def cast(self, origin:np.ndarray, direction:np.ndarray, eps:float=1e-12) -> Optional[np.ndarray]:
        """Returns the first boundary point hit by the ray origin + t*direction, t > eps, or None."""
        a = self.points
        e = np.roll(a, -1, axis=0) - a
        denom = _cross(direction, e)
        valid = np.abs(denom) > 1e-300
        safe = np.where(valid, denom, 1.0)
        t = _cross(a - origin, e) / safe
        s = _cross(a - origin, direction) / safe
        hit = valid & (s >= 0.0) & (s <= 1.0) & (t > eps)
        if not hit.any():
            return None
        return origin + t[hit].min() * direction

def _bottom_run_ends(labels:np.ndarray) -> Tuple[int, int]:
    bottom = labels == Part.BOTTOM
    if bottom.all() or not bottom.any():
        raise Gc2dError('Polygon labels must contain both parts')
    n = len(labels)
    start = next(i for i in range(n) if bottom[i] and not bottom[i - 1])
    end = start
    while bottom[(end + 1) % n]:
        end = (end + 1) % n
    return start, end

@dataclass(eq=False)
class PolyCurve2D():
    """A polynomial center curve y = poly(x) in a local frame, over a fixed x domain."""

    coefficients:np.ndarray
    """Polynomial coefficients, lowest order first."""

    domain:Tuple[float, float]

    origin:np.ndarray = field(default_factory=lambda: np.zeros(2))
    axes:np.ndarray = field(default_factory=lambda: np.eye(2))
    """Rows are the local x and y directions in world coordinates."""

    residual:float = 0.0
    """RMS residual of the least-squares fit."""

    core:Optional[Tuple[float, float]] = None
    """The x range the polynomial holds over; outside it the curve runs straight to ends."""

    ends:Optional[np.ndarray] = None
    """Local y of the curve at the two domain ends, set when the curve is extended to the object vertices."""

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def local(self, points:np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.origin) @ self.axes.T

    def world(self, local:np.ndarray) -> np.ndarray:
        return self.origin + np.asarray(local, dtype=float) @ self.axes

    def _extensions(self) -> Tuple[float, float, float, float]:
        """Returns (a, b, slope before a, slope after b) of the straight end pieces."""
        a, b = self.core
        (x0, x1), (y0, y1) = self.domain, self.ends
        return a, b, (P.polyval(a, self.coefficients) - y0) / (a - x0), (y1 - P.polyval(b, self.coefficients)) / (x1 - b)

    def y_at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = P.polyval(x, self.coefficients)
        if self.ends is None:
            return y
        a, b, before, after = self._extensions()
        y = np.where(x < a, self.ends[0] + before * (x - self.domain[0]), y)
        return np.where(x > b, self.ends[1] - after * (self.domain[1] - x), y)

    def at_x(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.world(np.stack([x, self.y_at(x)], axis=-1))

    def slope(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d1 = P.polyval(x, P.polyder(self.coefficients))
        if self.ends is None:
            return d1
        a, b, before, after = self._extensions()
        return np.where(x < a, before, np.where(x > b, after, d1))

    def curvature_at_x(self, x) -> np.ndarray:
        """Signed curvature, positive when the curve turns toward the local +y side."""
        x = np.asarray(x, dtype=float)
        d1 = self.slope(x)
        d2 = P.polyval(x, P.polyder(self.coefficients, 2))
        if self.ends is not None:
            d2 = np.where((x < self.core[0]) | (x > self.core[1]), 0.0, d2)
        return d2 / (1.0 + d1 ** 2) ** 1.5

    @cached_property
    def _table(self) -> Tuple[np.ndarray, np.ndarray]:
        x = np.linspace(self.domain[0], self.domain[1], 4001)
        return x, arclength(self.at_x(x))

    @property
    def length(self) -> float:
        return float(self._table[1][-1])

    def x_at(self, length) -> np.ndarray:
        x, table = self._table
        return np.interp(length, table, x)

    def length_at(self, x) -> np.ndarray:
        grid, table = self._table
        return np.interp(x, grid, table)

    def point(self, length) -> np.ndarray:
        return self.at_x(self.x_at(length))

    def tangent(self, length) -> np.ndarray:
        x = np.asarray(self.x_at(length))
        local = np.stack([np.ones_like(x), self.slope(x)], axis=-1)
        return unit(local @ self.axes)

    def normal(self, length) -> np.ndarray:
        """Unit normal toward the top side (the left of the curve direction)."""
        return _left(self.tangent(length))

    def curvature(self, length) -> np.ndarray:
        return self.curvature_at_x(self.x_at(length))

def fit_relaxed_cms_2d(points:np.ndarray, degree:int, origin:Optional[np.ndarray]=None, axes:Optional[np.ndarray]=None, domain:Optional[Tuple[float, float]]=None, ends:Optional[np.ndarray]=None) -> PolyCurve2D:
    """
    Fits y = poly(x) of the given degree by least squares to CMS points.

    Points are world coordinates; the local frame (origin, axes) defaults to the identity, in which case the
    points are taken as already aligned.  The domain defaults to the x range of the points.

    ends, the two object vertices in world coordinates, overrides domain: the curve then runs from the first
    vertex to the second, the polynomial over the x range of the points and straight pieces beyond it.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise Gc2dError(f'Curve degree must be in 1..{MAX_DEGREE}, got {degree}')
    points = np.asarray(points, dtype=float)
    if len(points) < degree + 1:
        raise Gc2dError(f'Need at least {degree + 1} points for degree {degree}, got {len(points)}')
    curve = PolyCurve2D(np.zeros(degree + 1), (0.0, 1.0),
                        np.zeros(2) if origin is None else np.asarray(origin, dtype=float),
                        np.eye(2) if axes is None else np.asarray(axes, dtype=float))
    local = curve.local(points)
    x, y = local[:, 0], local[:, 1]

    scale = float(np.abs(x).max())
    if not scale > 0:
        raise Gc2dError('CMS points share one x coordinate; re-align the frame')
    vander = P.polyvander(x / scale, degree)
    if np.linalg.cond(vander) > MAX_CONDITION:
        raise Gc2dError('Ill-conditioned curve fit (near-vertical points); re-align the frame')
    scaled, *_ = np.linalg.lstsq(vander, y, rcond=None)
    curve.coefficients = scaled / scale ** np.arange(degree + 1)
    curve.residual = float(np.sqrt(np.mean((P.polyval(x, curve.coefficients) - y) ** 2)))
    curve.domain = (float(x.min()), float(x.max())) if domain is None else (float(domain[0]), float(domain[1]))
    if ends is not None:
        start, end = curve.local(np.asarray(ends, dtype=float))
        curve.domain = (float(start[0]), float(end[0]))
    if not curve.domain[1] > curve.domain[0]:
        raise Gc2dError(f'Empty curve domain {curve.domain}')
    if ends is not None:
        margin = END_CAP_FRACTION * (curve.domain[1] - curve.domain[0])
        curve.core = (max(float(x.min()), curve.domain[0] + margin), min(float(x.max()), curve.domain[1] - margin))
        if not curve.core[1] > curve.core[0]:
            raise Gc2dError('The CMS points do not lie between the object vertices')
        curve.ends = np.array([start[1], end[1]])
    return curve

class RadiusProfile(NamedTuple):
    """The inscribed radius R sampled at increasing arclengths of a center curve."""
    lengths:np.ndarray
    values:np.ndarray

    def __call__(self, length) -> np.ndarray:
        return np.interp(length, self.lengths, self.values)

    def slope(self, length, step:float) -> np.ndarray:
        return (self(np.asarray(length) + step) - self(np.asarray(length) - step)) / (2.0 * step)

def radius_profile(curve:PolyCurve2D, polygon:Polygon2D, samples:int=400) -> RadiusProfile:
    """Returns R(l) as the distance from curve points to the densely sampled polygon boundary."""
    boundary, _ = polygon_boundary_samples(polygon.points, np.zeros(len(polygon.points)), polygon.perimeter / 4000.0)
    lengths = np.linspace(0.0, curve.length, samples)
    radii = cKDTree(boundary).query(curve.point(lengths))[0]
    return RadiusProfile(lengths, radii)

def station_lengths(curve:PolyCurve2D, count:int) -> np.ndarray:
    """Returns count arclengths at fractions k/(count+1), k = 1..count."""
    return curve.length * np.arange(1, count + 1) / (count + 1)

def medial_spokes_2d(curve:PolyCurve2D, radius:RadiusProfile, count:int, lengths:Optional[np.ndarray]=None) -> List[Tuple[Spoke, Spoke]]:
    """
    Returns (up, down) spoke pairs at count equidistant stations: tips p - R R' t +/- R sqrt(1 - R'^2) n, with
    R' by centered differences of step length/(4 count).
    """
    if count < 1:
        raise Gc2dError('Need at least one station')
    lengths = station_lengths(curve, count) if lengths is None else np.asarray(lengths, dtype=float)
    step = curve.length / (4.0 * count)
    r = radius(lengths)
    if (r <= 0).any():
        raise Gc2dError('Radius must be positive at every station')
    slope = radius.slope(lengths, step)
    if (np.abs(slope) >= 1.0).any():
        raise Gc2dError(f'|dR/dl| >= 1 at station(s) {np.flatnonzero(np.abs(slope) >= 1.0).tolist()}: end-cap region')

    p = curve.point(lengths)
    t = curve.tangent(lengths)
    n = curve.normal(lengths)
    across = np.sqrt(1.0 - slope ** 2)
    pairs = []
    for k in range(len(lengths)):
        up = unit(-slope[k] * t[k] + across[k] * n[k])
        down = unit(-slope[k] * t[k] - across[k] * n[k])
        pairs.append((Spoke(p[k], up, float(r[k])), Spoke(p[k], down, float(r[k]))))
    return pairs

@dataclass(eq=False)
class SemiChord():
    spine_point:np.ndarray
    up_tip:np.ndarray
    down_tip:np.ndarray

    length:float
    """Arclength of spine_point along the center curve."""

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.up_tip + self.down_tip)

    @property
    def span(self) -> float:
        return float(np.linalg.norm(self.up_tip - self.down_tip))

    @property
    def direction(self) -> np.ndarray:
        """Unit direction from the down tip to the up tip."""
        return unit(self.up_tip - self.down_tip)

@dataclass(eq=False)
class Gc2dModel():
    polygon:Polygon2D
    curve:PolyCurve2D
    chords:List[SemiChord]
    radius:RadiusProfile

    rcc:np.ndarray
    """Per chord, True when r * kappa >= 1 toward the curvature side."""

    @property
    def skeleton(self) -> np.ndarray:
        """Chord midpoints, the semi-chordal skeleton."""
        return np.array([c.midpoint for c in self.chords])

    @property
    def lengths(self) -> np.ndarray:
        return np.array([c.length for c in self.chords])

def semi_chordal_structure(curve:PolyCurve2D, polygon:Polygon2D, count:int, radius:Optional[RadiusProfile]=None) -> Gc2dModel:
    """
    Builds count semi-chords at arclength fractions k/(count+1) of the center curve.

    Each chord passes through the spoke tips p - R R' t +/- R sqrt(1 - R'^2) n, so it runs along n through
    p - R R' t; it is stretched to the polygon in both directions and then trimmed wherever two chords
    cross, until no chords cross.  Stations within 2% of either curve end ignore R' and keep their chord along
    n through p, so the count and the registration stay fixed.
    """
    if count < 1:
        raise Gc2dError('Need at least one chord')
    if radius is None:
        radius = radius_profile(curve, polygon)
    lengths = station_lengths(curve, count)
    step = curve.length / (4.0 * count)
    r = radius(lengths)
    slope = radius.slope(lengths, step)
    capped = (lengths < END_CAP_FRACTION * curve.length) | (lengths > (1.0 - END_CAP_FRACTION) * curve.length)
    slope[capped] = 0.0
    steep = np.abs(slope) >= 1.0
    if steep.any():
        warnings.warn(f'Radius slope reached 1 at {int(steep.sum())} station(s); clamped.', EndCapWarning)
        slope = np.clip(slope, -0.999, 0.999)

    chords = []
    for k, l in enumerate(lengths):
        p = curve.point(l)
        t = curve.tangent(l)
        n = curve.normal(l)
        center = p - r[k] * slope[k] * t
        up = polygon.cast(center, n)
        down = polygon.cast(center, -n)
        if up is None or down is None:
            raise Gc2dError(f'Chord {k} does not reach the boundary')
        x = _spine_crossing(curve, center, n, float(curve.x_at(l)), abs(r[k] * slope[k]) + step)
        chords.append(SemiChord(curve.at_x(x), up, down, float(curve.length_at(x))))

    order = np.array([c.length for c in chords])
    if (np.diff(order) <= 0).any():
        raise Gc2dError('Chords cross the center curve out of order')
    _trim(chords)
    rcc = _rcc_flags(curve, chords)
    return Gc2dModel(polygon, curve, chords, radius, rcc)

def _spine_crossing(curve:PolyCurve2D, center:np.ndarray, n:np.ndarray, x0:float, reach:float) -> float:
    """Returns the x where the line center + s*n meets the curve, searching near x0."""
    def side(x):
        return float(_cross(n, curve.at_x(x) - center))
    lo = max(curve.domain[0], x0 - 2.0 * reach)
    hi = min(curve.domain[1], x0 + 2.0 * reach)
    if side(lo) * side(hi) < 0:
        return brentq(side, lo, hi, xtol=1e-14)
    return x0

def _segment_crossing(a0, a1, b0, b1, eps:float=1e-9) -> Optional[np.ndarray]:
    da = a1 - a0
    db = b1 - b0
    denom = _cross(da, db)
    if abs(denom) < 1e-300:
        return None
    s = _cross(b0 - a0, db) / denom
    u = _cross(b0 - a0, da) / denom
    if eps < s < 1 - eps and eps < u < 1 - eps:
        return a0 + s * da
    return None

def _trim(chords:List[SemiChord]) -> None:
    for _ in range(len(chords) ** 2 + 1):
        crossed = False
        for i in range(len(chords)):
            for j in range(i + 1, len(chords)):
                a, b = chords[i], chords[j]
                point = _segment_crossing(a.down_tip, a.up_tip, b.down_tip, b.up_tip)
                if point is None:
                    continue
                crossed = True
                for chord in (a, b):
                    if np.dot(point - chord.spine_point, chord.up_tip - chord.down_tip) > 0:
                        chord.up_tip = point
                    else:
                        chord.down_tip = point
        if not crossed:
            return
    raise Gc2dError('Chord trimming did not settle')

def _rcc_flags(curve:PolyCurve2D, chords:List[SemiChord]) -> np.ndarray:
    flags = []
    for chord in chords:
        kappa = float(curve.curvature(chord.length))
        tip = chord.up_tip if kappa > 0 else chord.down_tip
        flags.append(abs(kappa) * float(np.linalg.norm(tip - chord.spine_point)) >= 1.0)
    return np.array(flags, dtype=bool)

def rcc_violations(model:Gc2dModel) -> List[int]:
    """Returns the indices of stations where the half-width toward the curvature side reaches 1/kappa."""
    return [int(i) for i in np.flatnonzero(model.rcc)]

def curve_frame(points:np.ndarray, start:np.ndarray, end:np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (origin, axes) of the principal frame of points with x running from start toward end and y to its left."""
    origin, axes, _ = principal_axes(points)
    e1 = axes[0] if np.dot(axes[0], np.asarray(end) - np.asarray(start)) >= 0 else -axes[0]
    return origin, np.stack([e1, _left(e1)])

def fit_gc2d(polygon:Polygon2D, degree:int=2, count:int=25, pitch:Optional[float]=None, delta:float=0.5, variant:AffinityVariant=AffinityVariant.LITERAL) -> Gc2dModel:
    """
    Runs the whole 2D pipeline: divides the boundary when the polygon has no labels, extracts the CMS,
    fits the relaxed center curve between the two object vertices and builds the semi-chordal structure.
    """
    if polygon.labels is None:
        polygon = polygon.with_labels(divide_polygon(polygon.points, delta, variant))
    cms = extract_cms(polygon, polygon.labels, pitch)
    start, end = (polygon.points[i] for i in polygon.vertices)
    origin, axes = curve_frame(cms.points, start, end)
    curve = fit_relaxed_cms_2d(cms.points, degree, origin, axes, ends=np.stack([start, end]))
    model = semi_chordal_structure(curve, polygon, count)
    violations = rcc_violations(model)
    if violations:
        warnings.warn(f'Relative curvature condition fails at station(s) {violations}.', RccWarning)
    logger.info('Fitted 2D GC: degree %d, %d chords, curve length %.4g', degree, count, curve.length)
    return model

class Straightened(NamedTuple):
    spine:np.ndarray
    up_tips:np.ndarray
    down_tips:np.ndarray

    @property
    def outline(self) -> np.ndarray:
        """The straightened polygon: down tips forward, then up tips backward."""
        return np.vstack([self.down_tips, self.up_tips[::-1]])

def straighten_2d(model:Gc2dModel) -> Straightened:
    """
    Maps the spine points to (l, 0) with l their curve arclength and each chord to a vertical segment of
    the same length centered on the axis.
    """
    lengths = model.lengths
    spans = np.array([c.span for c in model.chords])
    spine = np.stack([lengths, np.zeros_like(lengths)], axis=1)
    up = np.stack([lengths, 0.5 * spans], axis=1)
    down = np.stack([lengths, -0.5 * spans], axis=1)
    return Straightened(spine, up, down)

def model_to_dict(model:Gc2dModel) -> dict:
    curve = model.curve
    return {
        'polygon': model.polygon.points.tolist(),
        'labels': None if model.polygon.labels is None else model.polygon.labels.tolist(),
        'vertices': None if model.polygon.vertices is None else [int(v) for v in model.polygon.vertices],
        'curve': {
            'degree': curve.degree,
            'coefficients': curve.coefficients.tolist(),
            'domain': list(curve.domain),
            'origin': curve.origin.tolist(),
            'axes': curve.axes.tolist(),
            'residual': curve.residual,
            'core': None if curve.core is None else list(curve.core),
            'ends': None if curve.ends is None else curve.ends.tolist(),
            'length': curve.length,
        },
        'chords': [
            {'spine_point': c.spine_point.tolist(), 'up_tip': c.up_tip.tolist(), 'down_tip': c.down_tip.tolist(), 'length': c.length}
            for c in model.chords
        ],
        'radius': {'lengths': model.radius.lengths.tolist(), 'values': model.radius.values.tolist()},
        'rcc_violations': rcc_violations(model),
    }
