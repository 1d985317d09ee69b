import unittest

import numpy as np

from dssrep.util import angle_between, arclength, axis_angle, orthonormal_frame, point_at, polyline_length, principal_axes, tangents, unit

class TestUtil(unittest.TestCase):
    def test_unit(self):
        np.testing.assert_allclose([[0.6, 0.8, 0.0], [0.0, 0.0, 0.0]], unit([[3, 4, 0], [0, 0, 0]]))

    def test_arclength(self):
        points = np.array([[0, 0], [3, 4], [3, 5]])
        np.testing.assert_allclose([0, 5, 6], arclength(points))
        self.assertEqual(6.0, polyline_length(points))
        self.assertEqual(0.0, polyline_length(points[:1]))

    def test_point_at(self):
        points = np.array([[0.0, 0.0], [2.0, 0.0], [2.0, 2.0]])
        lengths = arclength(points)
        np.testing.assert_allclose([1.0, 0.0], point_at(points, lengths, 1.0))
        np.testing.assert_allclose([[2.0, 1.0], [2.0, 2.0]], point_at(points, lengths, [3.0, 10.0]))

    def test_tangents(self):
        points = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]])
        np.testing.assert_allclose(np.tile([1.0, 0.0, 0.0], (3, 1)), tangents(points))

    def test_principal_axes(self):
        rng = np.random.default_rng(0)
        points = rng.normal(size=(500, 3)) * [5.0, 2.0, 0.5]
        centroid, axes, variances = principal_axes(points, up=[0, 0, -1])
        self.assertTrue((np.diff(variances) < 0).all())
        self.assertAlmostEqual(1.0, np.linalg.det(axes))
        self.assertGreater(abs(axes[0, 0]), 0.99)
        self.assertLess(axes[2, 2], 0.0)

    def test_angles(self):
        self.assertAlmostEqual(np.pi / 2, angle_between(np.array([1, 0, 0]), np.array([0, 1, 0])))
        self.assertAlmostEqual(np.pi, angle_between(np.array([1, 0, 0]), np.array([-1, 0, 0])))
        self.assertAlmostEqual(0.0, axis_angle(np.array([1.0, 0, 0]), np.array([-1.0, 0, 0])))

    def test_orthonormal_frame(self):
        frame = orthonormal_frame(np.array([1.0, 0.2, 0.0]), np.array([0.0, 2.0, 0.0]))
        np.testing.assert_allclose(np.eye(3), frame.T @ frame, atol=1e-12)
        self.assertAlmostEqual(1.0, np.linalg.det(frame))
        np.testing.assert_allclose([0, 1, 0], frame[:, 1])
        np.testing.assert_allclose([1, 0, 0], frame[:, 0], atol=1e-12)

if __name__ == '__main__':
    unittest.main()
