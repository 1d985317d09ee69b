import unittest

import numpy as np

from dssrep.boundary_division import BoundaryDivision, Part
from dssrep.cms import CmsError, default_pitch, extract_cms, polygon_boundary_samples
from dssrep.synth import make_ellipsoid

class TestMeshCms(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = make_ellipsoid((2.0, 1.0, 0.5), resolution=3)
        labels = np.where(cls.mesh.vertices[:, 2] >= 0, Part.TOP, Part.BOTTOM)
        cls.division = BoundaryDivision.from_labels(cls.mesh, labels)
        cls.cms = extract_cms(cls.mesh, cls.division)

    def test_points(self):
        cms = self.cms
        self.assertEqual(3, cms.dimension)
        self.assertGreater(len(cms), 100)
        self.assertAlmostEqual(default_pitch(self.mesh.vertices), cms.spacing)
        self.assertTrue((cms.residuals <= cms.spacing).all())

    def test_mid_surface(self):
        points = self.cms.points
        self.assertLess(np.abs(points[:, 2]).max(), 0.15)
        self.assertTrue((points[:, 0] ** 2 / 4.0 + points[:, 1] ** 2 < 1.0).all())

    def test_spans_the_object(self):
        points = self.cms.points
        self.assertGreater(np.ptp(points[:, 0]), 3.0)
        self.assertGreater(np.ptp(points[:, 1]), 1.5)

    def test_coarse_pitch(self):
        self.assertRaises(CmsError, lambda: extract_cms(self.mesh, self.division, pitch=0.5))
        self.assertRaises(CmsError, lambda: extract_cms(self.mesh, self.division, pitch=-0.01))

    def test_needs_division(self):
        self.assertRaises(CmsError, lambda: extract_cms(self.mesh, self.division.labels))

class TestPolygonCms(unittest.TestCase):
    def setUp(self):
        t = (np.arange(80) + 0.5) * 2 * np.pi / 80
        self.points = np.stack([2.0 * np.cos(t), 0.6 * np.sin(t)], axis=1)
        self.labels = np.where(self.points[:, 1] > 0, Part.TOP, Part.BOTTOM)

    def test_ellipse(self):
        cms = extract_cms(self.points, self.labels)
        self.assertEqual(2, cms.dimension)
        self.assertLess(np.abs(cms.points[:, 1]).max(), 0.1)
        self.assertGreater(np.ptp(cms.points[:, 0]), 3.0)

    def test_boundary_samples(self):
        samples, labels = polygon_boundary_samples(self.points, self.labels, 0.05)
        self.assertEqual(len(samples), len(labels))
        self.assertGreater(len(samples), len(self.points))
        np.testing.assert_array_equal(self.points, samples[:len(self.points)])

if __name__ == '__main__':
    unittest.main()
