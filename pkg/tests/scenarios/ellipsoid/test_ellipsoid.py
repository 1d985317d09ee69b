import tempfile
import os
import unittest
import warnings

import numpy as np

from dssrep.boundary_division import divide_boundary
from dssrep.cms import extract_cms
from dssrep.exporters.ply import PLYExporter
from dssrep.exporters.report import ReportExporter
from dssrep.gof import fit_model, select_best_fit
from dssrep.lp_dssrep import reconstruct_origins, rep_from_dict, rep_to_dict
from dssrep.synth import make_ellipsoid

class TestEllipsoid(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.mesh = make_ellipsoid((2.0, 1.0, 0.5), 3)
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            cls.division = divide_boundary(cls.mesh)
            cls.cms = extract_cms(cls.mesh, cls.division)
            cls.fit = fit_model(cls.mesh, cls.division, cls.cms, (2, 2), resolution=64)

    def test_topology(self):
        rep = self.fit.rep
        self.assertEqual(91, rep.frame_count)
        self.assertEqual(90, rep.connection_count)
        self.assertEqual([2, 2], rep.meta['degrees'])

    def test_scores(self):
        report = self.fit.report
        self.assertTrue(self.fit.rcc.passed)
        self.assertGreater(report.volume_coverage, 0.5)
        self.assertGreater(report.skeletal_symmetry, 0.5)
        self.assertGreater(report.avg_tidiness, 0.5)
        self.assertLessEqual(report.strict_tidiness, report.avg_tidiness)

    def test_spine_along_long_axis(self):
        spine = self.fit.sheet.spine.points
        self.assertGreater(np.ptp(spine[:, 0]), 2.0)
        self.assertLess(np.abs(spine[:, 2]).max(), 0.25)

    def test_spine_reaches_crest(self):
        spine = self.fit.sheet.spine
        crest = self.mesh.vertices[self.division.crest]
        np.testing.assert_allclose(spine.points[[0, -1]], spine.stations[[0, -1]], atol=1e-9)
        for end in (spine.points[0], spine.points[-1]):
            self.assertLess(np.linalg.norm(crest - end, axis=1).min(), 0.1)
        self.assertGreater(np.ptp(spine.points[:, 0]), 3.6)

    def test_origins(self):
        np.testing.assert_allclose(self.fit.spokes.sites, reconstruct_origins(self.fit.rep), atol=1e-8)
        np.testing.assert_allclose(self.fit.spokes.sites, reconstruct_origins(rep_from_dict(rep_to_dict(self.fit.rep))), atol=1e-8)

    def test_frames_follow_their_curves(self):
        rep = self.fit.rep
        frames = rep.local_frames()
        index = {tuple(int(x) for x in node): i for i, node in enumerate(rep.nodes)}
        m = rep.meta['vein_samples']
        for (k, side, j), i in index.items():
            rotation = frames[i].rotation
            np.testing.assert_allclose(np.cross(rotation[:, 0], rotation[:, 1]), rotation[:, 2], atol=1e-9)
            if side == 0 or j == m:
                continue
            step = side * (frames[index[(k, side, j + 1)]].origin - frames[i].origin)
            self.assertGreater(float(np.dot(rotation[:, 1], step / np.linalg.norm(step))), 0.9)

    def test_tips_near_boundary(self):
        tips = np.vstack([self.fit.spokes.tips_up, self.fit.spokes.tips_down])
        radii = np.sqrt(((tips / [2.0, 1.0, 0.5]) ** 2).sum(axis=1))
        self.assertGreater(np.mean(np.abs(radii - 1.0) < 0.1), 0.9)

    def test_exports(self):
        pdf = ReportExporter().export('ellipsoid', self.fit, self.mesh, [self.fit.report])
        self.assertEqual(b'%PDF', bytes(pdf[:4]))
        with tempfile.TemporaryDirectory() as directory:
            written = PLYExporter(directory).export_fit(self.fit.sheet, self.fit.spokes, self.cms)
            self.assertEqual({'cms', 'spine', 'veins', 'tips_up', 'tips_down'}, set(written))
            self.assertTrue(all(os.path.isfile(path) for path in written.values()))

    def test_best_fit(self):
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            best, reports = select_best_fit(self.mesh, 2, division=self.division, cms=self.cms, resolution=64)
        self.assertTrue(best.report.rcc_passed)
        self.assertTrue(1 <= len(reports) <= 4)
        self.assertEqual(max(r.score2 for r in reports if r.rcc_passed), best.report.score2)

if __name__ == '__main__':
    unittest.main()
