import unittest

import numpy as np
from scipy.spatial.transform import Rotation
import trimesh

from dssrep.boundary_division import BoundaryDivision, Part
from dssrep.cms import CmsPointSet
from dssrep.flatten import pca_flatten
from dssrep.mesh_core import TriangleMesh
from dssrep.modes import PlaneMode
from dssrep.sweep_fit import SweepError, crest_polygon, fit_skeletal_sheet, fit_spine, rcc_report, rotation_minimizing_frames, station_section, up_vector, vein_samples
from dssrep.synth import make_ellipsoid

def bowl() -> CmsPointSet:
    u, v = np.meshgrid(np.linspace(-2, 2, 21), np.linspace(-1, 1, 11))
    u = u.ravel()
    v = v.ravel()
    points = np.stack([u, v, 0.1 * u ** 2], axis=1)
    return CmsPointSet(points, np.zeros(len(points)), 0.1)

def slab() -> TriangleMesh:
    box = trimesh.creation.box(extents=(4.0, 1.0, 1.0))
    return TriangleMesh(box.vertices, box.faces)

class TestSheet(unittest.TestCase):
    def test_quadratic_sheet(self):
        cms = bowl()
        surface = fit_skeletal_sheet(cms, 2, up=np.array([0.0, 0.0, 1.0]))
        self.assertEqual(2, surface.degree)
        self.assertLess(surface.residual, 1e-9)
        np.testing.assert_allclose(0.0, surface.deviation(cms.points), atol=1e-9)
        np.testing.assert_allclose([0.0, 0.0, 1.0], surface.axes[2], atol=1e-9)
        bump = surface.height([[1.0, 0.0]]) - surface.height([[0.0, 0.0]])
        self.assertAlmostEqual(0.1, float(bump[0]), places=9)
        np.testing.assert_allclose([[0.0, 0.0, 1.0]], surface.normal(surface.uv(cms.points[cms.points[:, 0] == 0][:1])), atol=1e-9)

    def test_plane_leaves_residual(self):
        surface = fit_skeletal_sheet(bowl(), 1, up=np.array([0.0, 0.0, 1.0]))
        self.assertGreater(surface.residual, 0.01)

    def test_grid(self):
        surface = fit_skeletal_sheet(bowl(), 2, up=np.array([0.0, 0.0, 1.0]))
        self.assertEqual((5, 5, 3), surface.grid(np.array([-1.0, -1.0]), np.array([1.0, 1.0]), 5).shape)

    def test_invalid_degree(self):
        self.assertRaises(SweepError, lambda: fit_skeletal_sheet(bowl(), 0))
        self.assertRaises(SweepError, lambda: fit_skeletal_sheet(bowl(), 8))

    def test_too_few_points(self):
        cms = bowl()
        few = CmsPointSet(cms.points[:5], cms.residuals[:5], cms.spacing)
        self.assertRaises(SweepError, lambda: fit_skeletal_sheet(few, 2))

class TestSpine(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        # sheet samples cover only the lower half of the band the crest outlines
        u, v = np.meshgrid(np.linspace(-1.9, 1.9, 39), np.linspace(-0.45, 0.0, 10))
        inside = (u / 2.0) ** 2 + (v / 0.5) ** 2 < 1.0
        points = np.stack([u[inside], v[inside], np.zeros(int(inside.sum()))], axis=1)
        up = np.array([0.0, 0.0, 1.0])
        flat = pca_flatten(points, up)
        surface = fit_skeletal_sheet(CmsPointSet(points, np.zeros(len(points)), 0.05), 1, flat, up)
        t = (np.arange(120) + 0.5) * 2 * np.pi / 120
        cls.crest = np.stack([2.0 * np.cos(t), 0.5 * np.sin(t), np.zeros_like(t)], axis=1)
        cls.spine = fit_spine(surface, flat, cls.crest, 2, 5, PlaneMode.RELAXED_SPINE_NORMAL_PLANES)

    def test_follows_crest_skeleton(self):
        self.assertLess(np.abs(self.spine.stations[1:-1, 1]).max(), 0.05)
        self.assertLess(np.abs(self.spine.points[:, 1]).max(), 0.12)
        np.testing.assert_allclose(0.0, self.spine.points[:, 2], atol=1e-9)

    def test_ends_on_crest(self):
        for end in (self.spine.points[0], self.spine.points[-1]):
            self.assertLess(np.linalg.norm(self.crest - end, axis=1).min(), 1e-9)
        self.assertGreater(np.ptp(self.spine.points[:, 0]), 3.6)
        self.assertEqual(5, len(self.spine.stations))

class TestFrames(unittest.TestCase):
    def test_straight_line(self):
        points = np.stack([np.linspace(0, 1, 5), np.zeros(5), np.zeros(5)], axis=1)
        frames = rotation_minimizing_frames(points, np.tile([1.0, 0.0, 0.0], (5, 1)), np.array([0.3, 0.0, 1.0]))
        np.testing.assert_allclose(np.tile([0.0, 0.0, 1.0], (5, 1)), frames, atol=1e-12)

    def test_planar_arc_keeps_binormal(self):
        t = np.linspace(0, np.pi, 50)
        points = np.stack([np.cos(t), np.sin(t), np.zeros_like(t)], axis=1)
        tangents = np.stack([-np.sin(t), np.cos(t), np.zeros_like(t)], axis=1)
        frames = rotation_minimizing_frames(points, tangents, np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(np.tile([0.0, 0.0, 1.0], (50, 1)), frames, atol=1e-9)

class TestRcc(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = slab()

    def test_section(self):
        segments = station_section(self.mesh.to_trimesh(), np.zeros(3), np.array([1.0, 0.0, 0.0]), 1e-9)
        self.assertGreater(len(segments), 0)
        np.testing.assert_allclose(0.0, segments[:, :, 0], atol=1e-9)

    def test_no_section_outside(self):
        segments = station_section(self.mesh.to_trimesh(), np.array([10.0, 0.0, 0.0]), np.array([1.0, 0.0, 0.0]), 1e-9)
        self.assertEqual(0, len(segments))

    def test_parallel_planes(self):
        report = rcc_report(self.mesh, np.array([[0.0, 0.0, 0.0], [0.5, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]))
        self.assertTrue(report.passed)
        np.testing.assert_allclose([0.5], report.margin)

    def test_planes_meeting_inside(self):
        normal = Rotation.from_euler('z', 60, degrees=True).apply([1.0, 0.0, 0.0])
        report = rcc_report(self.mesh, np.array([[0.0, 0.0, 0.0], [0.2, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0], normal]))
        self.assertFalse(report.passed)
        self.assertEqual([True], report.intersects_inside.tolist())
        self.assertAlmostEqual(-1.0, float(report.margin[0]), places=6)
        self.assertFalse(report.to_dict()['passed'])

    def test_planes_meeting_outside(self):
        normal = Rotation.from_euler('z', 10, degrees=True).apply([1.0, 0.0, 0.0])
        report = rcc_report(self.mesh, np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0]]), np.array([[1.0, 0.0, 0.0], normal]))
        self.assertTrue(report.passed)
        self.assertGreater(float(report.margin[0]), 0.0)

class TestHelpers(unittest.TestCase):
    def test_vein_samples(self):
        vein = np.array([[0.0, 0.0, 0.0], [4.0, 0.0, 0.0]])
        np.testing.assert_allclose([[1, 0, 0], [2, 0, 0], [3, 0, 0]], vein_samples(vein, 3))
        self.assertRaises(SweepError, lambda: vein_samples(np.zeros((2, 3)), 3))

    def test_crest_polygon(self):
        t = np.linspace(0, 2 * np.pi, 60, endpoint=False)
        polygon = crest_polygon(np.stack([2.0 * np.cos(t), np.sin(t)], axis=1))
        self.assertEqual(Part.BOTTOM, polygon.labels[0])
        self.assertTrue((polygon.labels == Part.TOP).any())
        self.assertEqual(2, len(polygon.vertices))

    def test_up_vector(self):
        mesh = make_ellipsoid((2.0, 1.0, 0.5), resolution=2)
        division = BoundaryDivision.from_labels(mesh, np.where(mesh.vertices[:, 2] >= 0, Part.TOP, Part.BOTTOM))
        up = up_vector(mesh, division)
        self.assertGreater(up[2], 0.0)
        self.assertLess(abs(up[0]), 1e-6)

if __name__ == '__main__':
    unittest.main()
