import json
import os
import tempfile
import unittest

import numpy as np

from dssrep.synth import Bend, Protrusion, SynthError, SynthSpec, bend_points, cap_mask, make_ellipsoid, make_object, protrusion_profile, simulate_groups, write_cohort

class TestSynthSpec(unittest.TestCase):
    def test_radii(self):
        self.assertRaises(SynthError, lambda: SynthSpec((1.0, 1.0, 0.5)))
        self.assertRaises(SynthError, lambda: SynthSpec((2.0, 1.0, 0.0)))
        self.assertRaises(SynthError, lambda: make_ellipsoid((0.5, 1.0, 2.0)))

    def test_protrusion_height(self):
        self.assertAlmostEqual(0.15, SynthSpec(protrusion=Protrusion()).protrusion_height)
        self.assertEqual(0.0, SynthSpec().protrusion_height)
        self.assertRaises(SynthError, lambda: SynthSpec(protrusion=Protrusion(height=0.5)))

    def test_bend_angle(self):
        self.assertRaises(SynthError, lambda: SynthSpec(bend=Bend(angle=90.0)))

    def test_dict(self):
        spec = SynthSpec(protrusion=Protrusion(angle=20.0), bend=Bend(angle=30.0), seed=3)
        self.assertEqual(spec, SynthSpec.from_dict(spec.to_dict()))
        self.assertEqual((2.0, 1.0, 0.5), SynthSpec.from_dict({'radii': [2.0, 1.0, 0.5]}).radii)

class TestShapes(unittest.TestCase):
    def test_ellipsoid(self):
        mesh = make_ellipsoid((2.0, 1.0, 0.5), 3)
        self.assertAlmostEqual(4.0 / 3.0 * np.pi, mesh.signed_volume, delta=0.05 * 4.0 / 3.0 * np.pi)
        extent = mesh.vertices.max(axis=0)
        self.assertTrue(np.all(extent <= [2.0 + 1e-9, 1.0 + 1e-9, 0.5 + 1e-9]))
        self.assertTrue(np.all(extent > [1.9, 0.95, 0.475]))

    def test_profile(self):
        radius = np.radians(25.0)
        values = protrusion_profile(np.array([0.0, 0.5 * radius, radius, 2 * radius]), radius)
        self.assertAlmostEqual(1.0, values[0])
        self.assertTrue(0.0 < values[1] < 1.0)
        np.testing.assert_allclose([0.0, 0.0], values[2:], atol=1e-12)

    def test_protrusion(self):
        spec = SynthSpec(protrusion=Protrusion(), resolution=3)
        plain = make_ellipsoid(spec.radii, 3)
        bumped = make_object(spec)
        self.assertGreater(bumped.signed_volume, plain.signed_volume)
        moved = np.linalg.norm(bumped.vertices - plain.vertices, axis=1) > 1e-12
        np.testing.assert_array_equal(cap_mask(plain.vertices, spec.radii, spec.protrusion) & moved, moved)

    def test_bend_points(self):
        points = bend_points(np.array([[2.0, 0.0, 0.0], [-2.0, 0.0, 0.0]]), Bend(angle=40.0), 1.0)
        theta = np.radians(40.0)
        np.testing.assert_allclose([2.0 * np.cos(theta), 2.0 * np.sin(theta), 0.0], points[0], atol=1e-12)
        np.testing.assert_allclose([-2.0, 0.0, 0.0], points[1])

    def test_bent_object(self):
        mesh = make_object(SynthSpec(bend=Bend(angle=40.0), resolution=2))
        self.assertGreater(mesh.vertices[:, 1].max(), 1.0)
        self.assertAlmostEqual(make_ellipsoid((2.0, 1.0, 0.5), 2).signed_volume, mesh.signed_volume, delta=0.15)

class TestCohorts(unittest.TestCase):
    def test_groups(self):
        cohorts = simulate_groups(3, seed=1, resolution=1)
        self.assertEqual((3, 3), (len(cohorts.a), len(cohorts.b)))
        self.assertTrue(all(s.protrusion is None for s in cohorts.specs_a))
        self.assertTrue(all(s.protrusion is not None for s in cohorts.specs_b))
        for spec in cohorts.specs_a + cohorts.specs_b:
            self.assertTrue(1.8 <= spec.radii[0] <= 2.2 and 0.9 <= spec.radii[1] <= 1.1 and 0.45 <= spec.radii[2] <= 0.55)

    def test_seeded(self):
        first = simulate_groups(2, effect='none', seed=4, resolution=1)
        second = simulate_groups(2, effect='none', seed=4, resolution=1)
        np.testing.assert_array_equal(first.b[1].vertices, second.b[1].vertices)
        self.assertTrue(all(s.protrusion is None for s in first.specs_b))

    def test_invalid(self):
        self.assertRaises(SynthError, lambda: simulate_groups(2, effect='dent'))
        self.assertRaises(SynthError, lambda: simulate_groups(0))

    def test_write(self):
        cohorts = simulate_groups(2, seed=2, resolution=1)
        with tempfile.TemporaryDirectory() as directory:
            paths = write_cohort(cohorts.b, cohorts.specs_b, directory, seed=2)
            self.assertEqual(['000.obj', '001.obj'], [os.path.basename(p) for p in paths])
            self.assertTrue(all(os.path.isfile(p) for p in paths))
            with open(os.path.join(directory, 'manifest.json')) as f:
                manifest = json.load(f)
        self.assertEqual(2, manifest['seed'])
        self.assertEqual('001.obj', manifest['objects'][1]['file'])
        self.assertIsNotNone(manifest['objects'][1]['spec']['protrusion'])

if __name__ == '__main__':
    unittest.main()
