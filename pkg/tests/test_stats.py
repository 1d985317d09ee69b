import os
import tempfile
import unittest
import warnings

import numpy as np
from scipy import stats as scipy_stats
from scipy.spatial.transform import Rotation

from dssrep.lp_dssrep import LpDssRep, gop_ids, to_wxyz, tree_topology
from dssrep.modes import Classifier, Correction
from dssrep.stats import StatsError, ZeroVarianceWarning, adjust, bh_adjust, classify_cv, euclideanize, feature_matrix, feature_vectors, frechet_mean, global_test, gop_columns, hotelling, householder, partial_tests, permutation, read_features_csv, run_tests, sphere_exp, sphere_log, write_features_csv
from dssrep.util import unit

def cohort(rng:np.random.Generator, count:int, spoke_scale:float=1.0, noise:float=0.05):
    parents, nodes = tree_topology(3, 1)
    n_f = len(parents)
    n_c = n_f - 1
    reps = []
    for _ in range(count):
        frames = to_wxyz(Rotation.from_rotvec(rng.normal(0.0, noise, (n_f, 3))).as_matrix())
        connection_dirs = unit([1.0, 0.0, 0.0] + rng.normal(0.0, noise, (n_c, 3)))
        spoke_dirs = unit([0.0, 0.0, 1.0] + rng.normal(0.0, noise, (n_f, 3)))
        connection_lens = np.exp(rng.normal(0.0, noise, n_c))
        spoke_lens = np.exp(rng.normal(0.0, noise, (n_f, 2)))
        spoke_lens[:, 0] *= spoke_scale
        reps.append(LpDssRep(parents, nodes, frames, connection_dirs, connection_lens, spoke_dirs, spoke_lens))
    return reps

class TestSphere(unittest.TestCase):
    def test_householder(self):
        base = unit(np.array([1.0, 2.0, 2.0]))
        np.testing.assert_allclose([0.0, 0.0, 1.0], base @ householder(base), atol=1e-12)

    def test_log_exp(self):
        base = unit(np.array([0.2, -0.3, 1.0]))
        points = unit(np.array([[0.1, 0.0, 1.0], [0.0, 0.5, 1.0], [1.0, 0.0, 0.2]]))
        np.testing.assert_allclose(points, sphere_exp(base, sphere_log(base, points)), atol=1e-12)
        np.testing.assert_allclose([[0.0, 0.0]], sphere_log(base, base), atol=1e-12)

    def test_frechet_mean(self):
        points = unit(np.array([[0.1, 0.0, 1.0], [-0.1, 0.0, 1.0], [0.0, 0.1, 1.0], [0.0, -0.1, 1.0]]))
        np.testing.assert_allclose([0.0, 0.0, 1.0], frechet_mean(points), atol=1e-9)

    def test_frechet_mean_antipodal(self):
        q = to_wxyz(Rotation.from_rotvec([[0.0, 0.0, 0.1], [0.0, 0.0, -0.1]]).as_matrix())
        q[1] = -q[1]
        np.testing.assert_allclose([1.0, 0.0, 0.0, 0.0], frechet_mean(q, antipodal=True), atol=1e-9)

    def test_no_mean(self):
        self.assertRaises(StatsError, lambda: frechet_mean(np.array([[0.0, 0.0, 1.0], [0.0, 0.0, -1.0]])))

class TestEuclideanize(unittest.TestCase):
    def test_columns(self):
        columns = gop_columns(9, 8)
        self.assertEqual(3 * 9 + 2 * 8, len(columns))
        self.assertEqual([0, 1, 2], columns[0].tolist())
        self.assertEqual([85, 86], columns[-1].tolist())
        self.assertEqual([87], gop_columns(9, 8, include_size=True)[-1].tolist())

    def test_features(self):
        reps = cohort(np.random.default_rng(0), 6)
        features = feature_matrix(euclideanize(reps))
        self.assertEqual((6, 87), features.shape)
        np.testing.assert_allclose(0.0, features[:, :27].mean(axis=0), atol=0.05)
        self.assertEqual((6, 88), feature_matrix(euclideanize(reps), include_size=True).shape)

    def test_topologies_must_match(self):
        reps = cohort(np.random.default_rng(0), 2)
        parents, nodes = tree_topology(5, 1)
        n_f = len(parents)
        other = LpDssRep(parents, nodes, np.tile([1.0, 0, 0, 0], (n_f, 1)), np.tile([1.0, 0, 0], (n_f - 1, 1)), np.ones(n_f - 1), np.tile([0, 0, 1.0], (n_f, 1)), np.ones((n_f, 2)))
        self.assertRaises(StatsError, lambda: euclideanize(reps + [other]))
        self.assertRaises(StatsError, lambda: euclideanize([]))

class TestGlobalTest(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(1)
        self.same_a = rng.normal(size=(20, 4))
        self.same_b = rng.normal(size=(20, 4))
        self.shifted = rng.normal(size=(20, 4)) + [2.0, 0.0, 0.0, 0.0]

    def test_difference(self):
        result = global_test(self.same_a, self.shifted, 200, seed=3)
        self.assertLess(result.p_value, 0.05)
        self.assertGreater(result.z_score, 2.0)
        self.assertEqual(200, result.permutations)

    def test_reproducible(self):
        first = global_test(self.same_a, self.same_b, 100, seed=4)
        second = global_test(self.same_a, self.same_b, 100, seed=4)
        self.assertEqual(first.p_value, second.p_value)
        self.assertGreaterEqual(first.p_value, 1.0 / 101)

    def test_constant_feature(self):
        a = np.hstack([self.same_a, np.ones((20, 1))])
        b = np.hstack([self.shifted, np.ones((20, 1))])
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            result = global_test(a, b, 50)
        self.assertTrue(any(issubclass(w.category, ZeroVarianceWarning) for w in caught))
        self.assertEqual([4], result.dropped)

    def test_small_cohorts(self):
        self.assertRaises(StatsError, lambda: global_test(self.same_a[:4], self.same_b, 10))
        self.assertRaises(StatsError, lambda: global_test(self.same_a, self.same_b[:, :3], 10))

    def test_permutation_stream(self):
        order = permutation(1, 5, 10)
        np.testing.assert_array_equal(order, permutation(1, 5, 10))
        self.assertEqual(list(range(10)), sorted(order.tolist()))

class TestPartialTests(unittest.TestCase):
    def test_hotelling_matches_t_test(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(12, 1))
        b = rng.normal(0.5, 1.0, size=(15, 1))
        self.assertAlmostEqual(scipy_stats.ttest_ind(a[:, 0], b[:, 0]).pvalue, hotelling(a, b)[2])

    def test_constant_gop(self):
        rng = np.random.default_rng(2)
        a = np.hstack([rng.normal(size=(10, 2)), np.ones((10, 1))])
        b = np.hstack([rng.normal(size=(10, 2)), np.ones((10, 1))])
        results = partial_tests(a, b, [np.array([0, 1]), np.array([2])], ['pair', 'flat'])
        self.assertEqual('hotelling', results[0].method)
        self.assertEqual(('flat', 1.0, 'constant'), (results[1].gop, results[1].raw_p, results[1].method))

    def test_permutation_method(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(10, 2))
        b = rng.normal(size=(10, 2)) + 3.0
        results = partial_tests(a, b, [np.array([0, 1])], method='permutation', permutations=99)
        self.assertEqual('permutation', results[0].method)
        self.assertAlmostEqual(0.01, results[0].raw_p)

class TestAdjust(unittest.TestCase):
    def test_bh(self):
        adjusted, flags = bh_adjust([0.01, 0.02, 0.03, 0.04])
        np.testing.assert_allclose([0.04, 0.04, 0.04, 0.04], adjusted)
        self.assertTrue(flags.all())

    def test_bonferroni(self):
        adjusted, flags = adjust([0.01, 0.3], Correction.BONFERRONI, 0.05)
        np.testing.assert_allclose([0.02, 0.6], adjusted)
        self.assertEqual([True, False], flags.tolist())

    def test_invalid(self):
        self.assertRaises(StatsError, lambda: bh_adjust([0.5, 1.5]))
        self.assertEqual(0, len(bh_adjust([])[0]))

class TestRunTests(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        rng = np.random.default_rng(5)
        cls.a = cohort(rng, 20)
        cls.b = cohort(rng, 20, spoke_scale=1.3)
        cls.report = run_tests(cls.a, cls.b, permutations=200, seed=0, scale=False)

    def test_global(self):
        self.assertTrue(self.report.significant)
        self.assertLess(self.report.global_result.p_value, 0.05)

    def test_spoke_lengths_flagged(self):
        expected = {name for name in gop_ids(self.a[0]) if name.startswith('spoke_len:')}
        self.assertTrue(expected <= set(self.report.significant_gops))

    def test_adjusted(self):
        for result in self.report.partial:
            self.assertGreaterEqual(result.adjusted_p, result.raw_p)
        self.assertEqual(3 * 9 + 2 * 8, len(self.report.partial))

    def test_to_dict(self):
        data = self.report.to_dict()
        self.assertEqual({'global', 'partial', 'alpha', 'fdr', 'correction'}, set(data))
        self.assertTrue(data['global']['significant'])
        self.assertEqual('bh', data['correction'])

class TestClassification(unittest.TestCase):
    def test_separable(self):
        rng = np.random.default_rng(6)
        a = rng.normal(size=(20, 3))
        b = rng.normal(size=(20, 3)) + 10.0
        for method in Classifier:
            report = classify_cv(a, b, method, folds=5, seed=1)
            self.assertEqual(1.0, report.accuracy)
            self.assertEqual(1.0, report.kappa)
            self.assertEqual(method.value, report.classifier)

    def test_too_few_for_folds(self):
        rng = np.random.default_rng(6)
        self.assertRaises(StatsError, lambda: classify_cv(rng.normal(size=(6, 2)), rng.normal(size=(6, 2)), folds=10))

    def test_feature_vectors(self):
        reps = cohort(np.random.default_rng(7), 5)
        self.assertEqual((5, 9 * 9 + 4 * 8), feature_vectors(reps).shape)
        self.assertEqual((5, 9 * 9 + 4 * 8 + 1), feature_vectors(reps, include_size=True).shape)

    def test_features_csv(self):
        matrix = np.arange(6.0).reshape(2, 3) / 7.0
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'features.csv')
            write_features_csv(matrix, path, ['a', 'b', 'c'])
            loaded, columns = read_features_csv(path)
        self.assertEqual(['a', 'b', 'c'], columns)
        np.testing.assert_array_equal(matrix, loaded)

if __name__ == '__main__':
    unittest.main()
