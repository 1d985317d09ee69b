import os
import tempfile
import unittest

import numpy as np
from scipy.spatial.transform import Rotation

from dssrep.gof import GofError, GofReport, TABLE_COLUMNS, collapse, fit_grid, format_table, gof_score, quaternion_distances, skeletal_symmetry, tidiness_scores, volume_coverage, write_table_csv
from dssrep.modes import Criterion
from dssrep.synth import make_ellipsoid

class TestScores(unittest.TestCase):
    def test_gof_score(self):
        score1, score2 = gof_score(0.890, 0.873, 0.973, 0.890)
        self.assertAlmostEqual(0.756, score1, delta=0.001)
        self.assertAlmostEqual(0.692, score2, delta=0.001)

    def test_gof_score_range(self):
        self.assertEqual((1.0, 1.0), gof_score(1.0, 1.0, 1.0, 1.0))
        self.assertRaises(GofError, lambda: gof_score(1.2, 1.0, 1.0, 1.0))
        self.assertRaises(GofError, lambda: gof_score(1.0, 1.0, 1.0, -0.5))

    def test_skeletal_symmetry(self):
        self.assertAlmostEqual(1.0, skeletal_symmetry([1.0, 2.0], [1.0, 2.0]))
        self.assertAlmostEqual(3 / 14 + 4 / 7, skeletal_symmetry([1.0, 2.0], [2.0, 2.0]))

    def test_skeletal_symmetry_invalid(self):
        self.assertRaises(GofError, lambda: skeletal_symmetry([1.0], [1.0, 2.0]))
        self.assertRaises(GofError, lambda: skeletal_symmetry([], []))
        self.assertRaises(GofError, lambda: skeletal_symmetry([0.0], [1.0]))

class TestTidiness(unittest.TestCase):
    def test_constant_frames(self):
        frames = np.tile(np.eye(3), (4, 1, 1))
        scores = tidiness_scores(frames, [frames, frames], [0.0, 0.0])
        self.assertAlmostEqual(1.0, scores.average)
        self.assertAlmostEqual(1.0, scores.strict)

    def test_half_turn(self):
        turn = Rotation.from_euler('z', 180, degrees=True).as_matrix()
        spine = np.stack([np.eye(3), turn])
        steady = np.tile(np.eye(3), (3, 1, 1))
        scores = tidiness_scores(spine, [steady], [0.0])
        self.assertAlmostEqual(0.0, scores.strict)
        self.assertAlmostEqual(1.0 - 2.0 * (np.pi / 2) / (3 * np.pi), scores.average)

    def test_crossing_angle(self):
        steady = np.tile(np.eye(3), (3, 1, 1))
        scores = tidiness_scores(steady, [steady], [np.pi / 4])
        self.assertAlmostEqual(0.5, scores.strict)

    def test_quaternion_distances(self):
        rotations = Rotation.from_euler('z', [0, 30, 90], degrees=True).as_matrix()
        np.testing.assert_allclose(np.radians([15, 30]), quaternion_distances(rotations))

    def test_invalid(self):
        steady = np.tile(np.eye(3), (3, 1, 1))
        self.assertRaises(GofError, lambda: tidiness_scores(steady, [steady], []))
        self.assertRaises(GofError, lambda: tidiness_scores(steady[:1], [steady], [0.0]))

class TestCoverage(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = make_ellipsoid((2.0, 1.0, 0.5), resolution=2)

    def test_collapse_onto_vertices(self):
        soup, flipped = collapse(self.mesh, np.array(self.mesh.vertices))
        self.assertEqual(0, flipped)
        self.assertEqual(self.mesh.face_count, len(soup.faces))

    def test_full_coverage(self):
        self.assertAlmostEqual(1.0, volume_coverage(self.mesh, np.array(self.mesh.vertices), 32))

    def test_too_few_points(self):
        self.assertRaises(GofError, lambda: volume_coverage(self.mesh, np.array(self.mesh.vertices[:10])))

class TestReports(unittest.TestCase):
    def setUp(self):
        self.reports = [GofReport(0.9, 0.8, 0.95, 0.7, (1, 2)), GofReport(0.85, 0.9, 0.9, 0.8, (2, 2), rcc_passed=False)]

    def test_scores(self):
        report = self.reports[0]
        self.assertAlmostEqual(0.9 * 0.8 * 0.95, report.score(Criterion.SCORE1))
        self.assertAlmostEqual(0.9 * 0.8 * 0.7, report.score(Criterion.SCORE2))
        data = report.to_dict()
        self.assertEqual([1, 2], data['degrees'])
        self.assertAlmostEqual(report.score2, data['score2'])

    def test_format_table(self):
        lines = format_table(self.reports)
        self.assertEqual(3, len(lines))
        self.assertTrue(lines[0].strip().startswith('sheet_degree'))
        self.assertTrue(lines[1].endswith('pass'))
        self.assertTrue(lines[2].endswith('fail'))
        self.assertEqual(len(lines[0]), len(lines[1]))

    def test_table_csv(self):
        with tempfile.TemporaryDirectory() as directory:
            path = os.path.join(directory, 'scores.csv')
            write_table_csv(self.reports, path)
            with open(path) as f:
                lines = f.read().splitlines()
        self.assertEqual(','.join(TABLE_COLUMNS), lines[0])
        self.assertEqual(3, len(lines))

    def test_grid_range(self):
        mesh = make_ellipsoid((2.0, 1.0, 0.5), resolution=1)
        self.assertRaises(GofError, lambda: fit_grid(mesh, 0))
        self.assertRaises(GofError, lambda: fit_grid(mesh, 8))

if __name__ == '__main__':
    unittest.main()
