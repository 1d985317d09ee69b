import csv
from dataclasses import asdict, dataclass, field
import logging
from typing import List, Optional, Sequence, Tuple
import warnings

import numpy as np
from scipy import stats as scipy_stats
from sklearn.metrics import cohen_kappa_score, confusion_matrix
from sklearn.model_selection import StratifiedKFold, cross_val_predict
from sklearn.naive_bayes import GaussianNB
from sklearn.neighbors import KNeighborsClassifier
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import StandardScaler

from .lp_dssrep import LpDssRep, gop_ids, lp_size, normalize, to_feature_vector
from .modes import Classifier, Correction, TestMethod

logger = logging.getLogger(__name__)

MAX_FRECHET_ITERATIONS = 100
FRECHET_TOLERANCE = 1e-12
MAX_CONDITION = 1e8
MIN_COHORT = 5
DIRECTION_RULE = 'mean-difference'

class StatsError(ValueError):
    """Raised for cohorts that cannot be compared."""
    pass

class ZeroVarianceWarning(UserWarning):
    """Used to warn when constant features were left out of a test."""
    pass

class PermutationFallbackWarning(UserWarning):
    """Used to warn when a GOP's pooled covariance is too ill-conditioned for Hotelling's test."""
    pass

def householder(base:np.ndarray) -> np.ndarray:
    """Returns the reflection that swaps the unit vector base with the last coordinate axis."""
    base = np.asarray(base, dtype=float)
    pole = np.zeros_like(base)
    pole[-1] = 1.0
    v = base - pole
    norm2 = np.dot(v, v)
    if norm2 < 1e-30:
        return np.eye(len(base))
    return np.eye(len(base)) - 2.0 * np.outer(v, v) / norm2

def sphere_log(base:np.ndarray, points:np.ndarray) -> np.ndarray:
    """Maps unit vectors to tangent coordinates at base, (k, d - 1)."""
    y = np.atleast_2d(points) @ householder(base)
    theta = np.arccos(np.clip(y[:, -1], -1.0, 1.0))
    scale = np.where(theta > 1e-12, theta / np.where(theta > 1e-12, np.sin(theta), 1.0), 1.0)
    return scale[:, None] * y[:, :-1]

def sphere_exp(base:np.ndarray, coords:np.ndarray) -> np.ndarray:
    """Inverse of sphere_log."""
    coords = np.atleast_2d(coords)
    theta = np.linalg.norm(coords, axis=1)
    scale = np.where(theta > 1e-12, np.sin(theta) / np.where(theta > 1e-12, theta, 1.0), 1.0)
    y = np.concatenate([scale[:, None] * coords, np.cos(theta)[:, None]], axis=1)
    return y @ householder(base)

def _align(points:np.ndarray, reference:np.ndarray) -> np.ndarray:
    return np.where((points @ reference)[:, None] < 0, -points, points)

def frechet_mean(points:np.ndarray, antipodal:bool=False, tol:float=FRECHET_TOLERANCE, max_iterations:int=MAX_FRECHET_ITERATIONS) -> np.ndarray:
    """
    Returns the intrinsic mean of unit vectors by iterated tangent averaging.  With antipodal set, x and -x
    are the same point (unit quaternions): samples are moved to the hemisphere of the running mean and the
    mean is returned with a nonnegative first coordinate.
    """
    points = np.asarray(points, dtype=float)
    if antipodal:
        points = _align(points, points[0])
    mean = points.mean(axis=0)
    if np.linalg.norm(mean) < 1e-12:
        raise StatsError('The samples have no well-defined mean direction')
    mean /= np.linalg.norm(mean)
    for _ in range(max_iterations):
        if antipodal:
            points = _align(points, mean)
        step = sphere_log(mean, points).mean(axis=0)
        mean = sphere_exp(mean, step[None, :])[0]
        mean /= np.linalg.norm(mean)
        if np.linalg.norm(step) < tol:
            break
    else:
        raise StatsError(f'Frechet mean did not converge in {max_iterations} iterations')
    if antipodal and mean[0] < 0:
        mean = -mean
    return mean

@dataclass(eq=False)
class EuclideanizedRep():
    frame_feats:np.ndarray
    """(n_f, 3) tangent coordinates of the relative frames at their Frechet means on S3."""

    dir_feats:np.ndarray
    """(n_c + n_f, 2) tangent coordinates of the connection directions, then the spoke directions, on S2."""

    len_feats:np.ndarray
    """n_c + 2 n_f log lengths: connections, then up/down spoke pairs."""

    size:Optional[float] = None
    """Log LP-size, kept for size-and-shape analysis."""

    def vector(self, include_size:bool=False) -> np.ndarray:
        """Concatenates the features in GOP order."""
        parts = [self.frame_feats.ravel(), self.dir_feats.ravel(), self.len_feats]
        if include_size:
            parts.append([self.size if self.size is not None else 0.0])
        return np.concatenate(parts)

def gop_columns(n_f:int, n_c:int, include_size:bool=False) -> List[np.ndarray]:
    """
    Returns the feature columns of every GOP in EuclideanizedRep.vector(): frames (3 columns each),
    connection directions and spoke directions (2 each), connection lengths (1 each) and spoke length
    pairs (2 each).
    """
    columns = []
    start = 0
    for count, width in ((n_f, 3), (n_c, 2), (n_f, 2)):
        columns += [np.arange(start + i * width, start + (i + 1) * width) for i in range(count)]
        start += count * width
    columns += [np.array([start + i]) for i in range(n_c)]
    start += n_c
    columns += [np.array([start + 2 * i, start + 2 * i + 1]) for i in range(n_f)]
    start += 2 * n_f
    if include_size:
        columns.append(np.array([start]))
    return columns

def prepare(cohort:Sequence[LpDssRep], scale:bool=True) -> List[LpDssRep]:
    """Removes scale from every rep unless scale is False."""
    return [normalize(rep) for rep in cohort] if scale else list(cohort)

def euclideanize(cohort:Sequence[LpDssRep]) -> List[EuclideanizedRep]:
    """
    Maps a cohort of reps with one shared topology to Euclidean features: spherical GOPs to tangent
    coordinates at their Frechet means, lengths to their logarithms.
    """
    cohort = list(cohort)
    if not cohort:
        raise StatsError('Empty cohort')
    first = cohort[0]
    for rep in cohort[1:]:
        if not first.same_topology(rep):
            raise StatsError('All reps of a cohort must share one frame tree')

    frames = np.stack([rep.frames for rep in cohort])
    directions = np.stack([np.vstack([rep.connection_dirs, rep.spoke_dirs]) for rep in cohort])
    frame_feats = np.zeros(frames.shape[:2] + (3,))
    dir_feats = np.zeros(directions.shape[:2] + (2,))
    for i in range(frames.shape[1]):
        mean = frechet_mean(frames[:, i], antipodal=True)
        frame_feats[:, i] = sphere_log(mean, _align(frames[:, i], mean))
    for i in range(directions.shape[1]):
        mean = frechet_mean(directions[:, i])
        dir_feats[:, i] = sphere_log(mean, directions[:, i])
    logger.debug('Euclideanized %d reps', len(cohort))
    return [EuclideanizedRep(frame_feats[k], dir_feats[k], np.log(rep.lengths), float(np.log(rep.meta.get('size') or lp_size(rep))))
            for k, rep in enumerate(cohort)]

def feature_matrix(features:Sequence[EuclideanizedRep], include_size:bool=False) -> np.ndarray:
    return np.stack([f.vector(include_size) for f in features])

def _check_cohorts(a:np.ndarray, b:np.ndarray, minimum:int=MIN_COHORT) -> Tuple[np.ndarray, np.ndarray]:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if len(a) < minimum or len(b) < minimum:
        raise StatsError(f'Each cohort needs at least {minimum} objects, got {len(a)} and {len(b)}')
    if a.shape[1] != b.shape[1]:
        raise StatsError(f'Feature dimensions differ: {a.shape[1]} and {b.shape[1]}')
    return a, b

def permutation(seed:int, index:int, count:int) -> np.ndarray:
    """Returns the index-th label permutation of a counter-based stream, the same in any evaluation order."""
    return np.random.Generator(np.random.Philox(key=seed, counter=[0, index, 0, 0])).permutation(count)

@dataclass
class GlobalResult():
    statistic:float
    z_score:float
    p_value:float
    permutations:int
    direction_rule:str = DIRECTION_RULE
    dropped:List[int] = field(default_factory=list)
    """Constant feature columns left out of the test."""

def global_test(a:np.ndarray, b:np.ndarray, permutations:int=1000, seed:int=0) -> GlobalResult:
    """
    Direction-projection-permutation test on standardized features.  The direction is the unit difference of
    the cohort means, recomputed for every relabelling; the statistic is the difference of the projected
    cohort means.
    """
    a, b = _check_cohorts(a, b)
    if permutations < 1:
        raise StatsError('Need at least one permutation')
    pooled = np.vstack([a, b])
    spread = pooled.std(axis=0, ddof=1)
    constant = spread <= 1e-12 * np.maximum(1.0, np.abs(pooled).max(axis=0))
    if constant.all():
        raise StatsError('Every feature is constant across both cohorts')
    if constant.any():
        warnings.warn(f'Left out {int(constant.sum())} constant feature(s).', ZeroVarianceWarning)
    z = (pooled[:, ~constant] - pooled[:, ~constant].mean(axis=0)) / spread[~constant]
    n_a = len(a)

    def statistic(order):
        first = z[order[:n_a]]
        second = z[order[n_a:]]
        difference = second.mean(axis=0) - first.mean(axis=0)
        norm = np.linalg.norm(difference)
        if norm == 0:
            return 0.0
        w = difference / norm
        return float((second @ w).mean() - (first @ w).mean())

    observed = statistic(np.arange(len(z)))
    null = np.array([statistic(order) for order in _permutation_orders(seed, permutations, len(z))])
    p = (1.0 + np.count_nonzero(null >= observed)) / (permutations + 1.0)
    sd = null.std(ddof=1) if permutations > 1 else 0.0
    z_score = (observed - null.mean()) / sd if sd > 0 else 0.0
    logger.info('Global test: statistic %.4g, z %.3f, p %.4g (%d permutations)', observed, z_score, p, permutations)
    return GlobalResult(observed, float(z_score), float(p), permutations, DIRECTION_RULE, np.flatnonzero(constant).tolist())

def _permutation_orders(seed:int, rounds:int, count:int):
    for i in range(rounds):
        yield permutation(seed, i, count)

def hotelling(a:np.ndarray, b:np.ndarray) -> Tuple[float, float, float]:
    """Returns (T2, F, p) of the two-sample Hotelling test with pooled covariance.  Raises StatsError when singular."""
    n_a, n_b = len(a), len(b)
    p = a.shape[1]
    n = n_a + n_b
    if n - p - 1 < 1:
        raise StatsError('Too few objects for Hotelling\'s test')
    pooled = ((n_a - 1) * np.cov(a, rowvar=False, ddof=1).reshape(p, p) + (n_b - 1) * np.cov(b, rowvar=False, ddof=1).reshape(p, p)) / (n - 2)
    if np.linalg.cond(pooled) > MAX_CONDITION:
        raise StatsError('Pooled covariance is singular')
    d = b.mean(axis=0) - a.mean(axis=0)
    t2 = float(n_a * n_b / n * d @ np.linalg.solve(pooled, d))
    f = t2 * (n - p - 1) / (p * (n - 2))
    return t2, f, float(scipy_stats.f.sf(f, p, n - p - 1))

def _permutation_p(a:np.ndarray, b:np.ndarray, orders:np.ndarray) -> float:
    pooled = np.vstack([a, b])
    n_a = len(a)

    def statistic(order):
        return float(np.sum((pooled[order[n_a:]].mean(axis=0) - pooled[order[:n_a]].mean(axis=0)) ** 2))

    observed = statistic(np.arange(len(pooled)))
    null = np.array([statistic(order) for order in orders])
    return float((1.0 + np.count_nonzero(null >= observed - 1e-15 * max(1.0, observed))) / (len(orders) + 1.0))

@dataclass
class PartialResult():
    gop:str
    raw_p:float
    method:str
    adjusted_p:float = 1.0
    significant:bool = False

def partial_tests(a:np.ndarray, b:np.ndarray, columns:Sequence[np.ndarray], names:Optional[Sequence[str]]=None, method:TestMethod=TestMethod.HOTELLING,
                  permutations:int=1000, seed:int=0) -> List[PartialResult]:
    """
    Tests every GOP on its own columns: Hotelling's T2 for multivariate GOPs, Student's t for single lengths,
    or a permutation test on the squared mean difference.  A GOP whose pooled covariance is too
    ill-conditioned falls back to the permutation test; a GOP that is constant across both cohorts gets p = 1.
    """
    a, b = _check_cohorts(a, b)
    method = TestMethod(method)
    names = list(names) if names is not None else [f'gop{i}' for i in range(len(columns))]
    orders = None
    results = []
    fallbacks = 0
    for name, cols in zip(names, columns):
        x = a[:, cols]
        y = b[:, cols]
        pooled = np.vstack([x, y])
        if np.all(np.ptp(pooled, axis=0) <= 1e-12 * np.maximum(1.0, np.abs(pooled).max(axis=0))):
            results.append(PartialResult(name, 1.0, 'constant'))
            continue
        used = method.value
        p = None
        if method == TestMethod.HOTELLING:
            if len(cols) == 1:
                p = float(scipy_stats.ttest_ind(x[:, 0], y[:, 0]).pvalue)
            else:
                try:
                    p = hotelling(x, y)[2]
                except StatsError:
                    fallbacks += 1
                    used = TestMethod.PERMUTATION.value
        if p is None or not np.isfinite(p):
            if orders is None:
                orders = permutations_matrix(seed, permutations, len(a) + len(b))
            p = _permutation_p(x, y, orders)
        results.append(PartialResult(name, float(p), used))
    if fallbacks:
        warnings.warn(f'{fallbacks} GOP(s) fell back to the permutation test.', PermutationFallbackWarning)
    return results

def permutations_matrix(seed:int, rounds:int, count:int) -> np.ndarray:
    return np.array(list(_permutation_orders(seed, rounds, count))).reshape(rounds, count)

def adjust(p:Sequence[float], method:Correction=Correction.BH, level:float=0.1) -> Tuple[np.ndarray, np.ndarray]:
    """Returns (adjusted p-values, flags adjusted <= level) under Benjamini-Hochberg or Bonferroni."""
    p = np.asarray(p, dtype=float)
    if p.size == 0:
        return p, np.zeros(0, dtype=bool)
    if np.any((p < 0) | (p > 1)):
        raise StatsError('p-values must lie in [0, 1]')
    if Correction(method) == Correction.BH:
        adjusted = scipy_stats.false_discovery_control(p, method='bh')
    else:
        adjusted = np.minimum(1.0, p * p.size)
    adjusted = np.maximum(adjusted, p)
    return adjusted, adjusted <= level

def bh_adjust(p:Sequence[float], fdr:float=0.1) -> Tuple[np.ndarray, np.ndarray]:
    return adjust(p, Correction.BH, fdr)

@dataclass
class TestReport():
    global_result:GlobalResult
    partial:List[PartialResult]
    alpha:float = 0.05
    fdr:float = 0.1
    correction:str = Correction.BH.value

    @property
    def significant(self) -> bool:
        return self.global_result.p_value <= self.alpha

    @property
    def significant_gops(self) -> List[str]:
        return [r.gop for r in self.partial if r.significant]

    def to_dict(self) -> dict:
        return {
            'global': dict(asdict(self.global_result), significant=self.significant),
            'partial': [asdict(r) for r in self.partial],
            'alpha': self.alpha,
            'fdr': self.fdr,
            'correction': self.correction,
        }

def run_tests(cohort_a:Sequence[LpDssRep], cohort_b:Sequence[LpDssRep], method:TestMethod=TestMethod.HOTELLING, permutations:int=1000, seed:int=0,
              alpha:float=0.05, fdr:float=0.1, correction:Correction=Correction.BH, scale:bool=True, include_size:bool=False) -> TestReport:
    """Euclideanizes both cohorts together and runs the global test and the corrected partial tests."""
    reps = prepare(list(cohort_a) + list(cohort_b), scale)
    features = feature_matrix(euclideanize(reps), include_size)
    a = features[:len(cohort_a)]
    b = features[len(cohort_a):]
    first = reps[0]
    columns = gop_columns(first.frame_count, first.connection_count, include_size)
    names = gop_ids(first) + (['size'] if include_size else [])
    global_result = global_test(a, b, permutations, seed)
    partial = partial_tests(a, b, columns, names, method, permutations, seed)
    adjusted, flags = adjust([r.raw_p for r in partial], correction, fdr)
    for result, p, flag in zip(partial, adjusted, flags):
        result.adjusted_p = float(p)
        result.significant = bool(flag)
    logger.info('%d of %d GOPs significant after %s', int(flags.sum()), len(partial), Correction(correction).value)
    return TestReport(global_result, partial, alpha, fdr, Correction(correction).value)

def feature_vectors(cohort:Sequence[LpDssRep], scale:bool=True, include_size:bool=False) -> np.ndarray:
    """Returns the classification features of every rep, one row each."""
    return np.stack([to_feature_vector(rep, include_size) for rep in prepare(cohort, scale)])

@dataclass
class ClassificationReport():
    accuracy:float
    kappa:float
    sensitivity:float
    specificity:float
    folds:int
    classifier:str

    def to_dict(self) -> dict:
        return asdict(self)

def classify_cv(a:np.ndarray, b:np.ndarray, method:Classifier=Classifier.KNN, folds:int=10, seed:int=0) -> ClassificationReport:
    """
    Stratified k-fold cross-validation of a KNN (k = 5 on standardized features) or Gaussian naive Bayes
    classifier.  Cohort b is the positive class; kappa comes from the pooled confusion matrix.
    """
    a, b = _check_cohorts(a, b, folds)
    method = Classifier(method)
    x = np.vstack([a, b])
    y = np.concatenate([np.zeros(len(a), dtype=int), np.ones(len(b), dtype=int)])
    if method == Classifier.KNN:
        model = make_pipeline(StandardScaler(), KNeighborsClassifier(n_neighbors=5))
    else:
        model = make_pipeline(StandardScaler(), GaussianNB())
    predicted = cross_val_predict(model, x, y, cv=StratifiedKFold(n_splits=folds, shuffle=True, random_state=seed))
    tn, fp, fn, tp = confusion_matrix(y, predicted, labels=[0, 1]).ravel()
    report = ClassificationReport(float((tp + tn) / len(y)), float(cohen_kappa_score(y, predicted)), float(tp / (tp + fn)), float(tn / (tn + fp)), folds, method.value)
    logger.info('%s: accuracy %.3f, kappa %.3f', method.value, report.accuracy, report.kappa)
    return report

def write_features_csv(matrix:np.ndarray, path:str, columns:Optional[Sequence[str]]=None) -> None:
    matrix = np.atleast_2d(matrix)
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(list(columns) if columns is not None else [f'f{i}' for i in range(matrix.shape[1])])
        writer.writerows([repr(float(v)) for v in row] for row in matrix)

def read_features_csv(path:str) -> Tuple[np.ndarray, List[str]]:
    with open(path, 'r', newline='') as f:
        rows = list(csv.reader(f))
    if not rows:
        raise StatsError(f'Empty feature file: {path}')
    return np.array([[float(v) for v in row] for row in rows[1:]]).reshape(len(rows) - 1, len(rows[0])), rows[0]

def write_partial_csv(report:TestReport, path:str) -> None:
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(['gop', 'raw_p', 'adjusted_p', 'significant', 'method'])
        writer.writerows([r.gop, r.raw_p, r.adjusted_p, int(r.significant), r.method] for r in report.partial)
