import os
import unittest
import warnings

import numpy as np

from dssrep.boundary_division import divide_boundary
from dssrep.cms import extract_cms
from dssrep.gof import fit_model, select_best_fit
from dssrep.modes import Criterion
from dssrep.synth import Bend, SynthSpec, make_object
from dssrep.util import unit

class TestBentObject(unittest.TestCase):
    def test_bent_object(self):
        mesh = make_object(SynthSpec(bend=Bend(angle=40.0), resolution=3))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            division = divide_boundary(mesh)
            fit = fit_model(mesh, division, extract_cms(mesh, division), (2, 3), resolution=64)

        self.assertEqual(91, fit.rep.frame_count)
        tangents = unit(fit.sheet.spine.tangents)
        turn = np.arccos(np.clip(np.dot(tangents[0], tangents[-1]), -1.0, 1.0))
        self.assertGreater(turn, 0.3)
        self.assertGreater(fit.report.volume_coverage, 0.4)

@unittest.skipUnless(os.getenv('DSSREP_SLOW_TESTS') == '1', 'set DSSREP_SLOW_TESTS=1 to fit the degree grid')
class TestBentGrid(unittest.TestCase):
    def test_winner_tracks_the_bend(self):
        mesh = make_object(SynthSpec(bend=Bend(angle=40.0), resolution=3))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            best, _ = select_best_fit(mesh, 4, Criterion.SCORE2, resolution=64)
        self.assertGreaterEqual(best.report.degrees[1], 3)

if __name__ == '__main__':
    unittest.main()
