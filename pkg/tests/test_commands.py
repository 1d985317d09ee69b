import json
import os
import tempfile
import unittest
import warnings

import numpy as np
from scipy.spatial.transform import Rotation

from dssrep.commands import Commands
from dssrep.config import RunConfig
from dssrep.lp_dssrep import LpDssRep, read_rep, to_wxyz, tree_topology, write_rep
from dssrep.util import unit

def write_cohort_reps(directory:str, rng:np.random.Generator, count:int, spoke_scale:float=1.0):
    parents, nodes = tree_topology(3, 1)
    n_f = len(parents)
    os.makedirs(directory, exist_ok=True)
    for k in range(count):
        spoke_lens = np.exp(rng.normal(0.0, 0.05, (n_f, 2)))
        spoke_lens[:, 0] *= spoke_scale
        rep = LpDssRep(parents, nodes, to_wxyz(Rotation.from_rotvec(rng.normal(0.0, 0.05, (n_f, 3))).as_matrix()),
                       unit([1.0, 0.0, 0.0] + rng.normal(0.0, 0.05, (n_f - 1, 3))), np.exp(rng.normal(0.0, 0.05, n_f - 1)),
                       unit([0.0, 0.0, 1.0] + rng.normal(0.0, 0.05, (n_f, 3))), spoke_lens)
        write_rep(rep, os.path.join(directory, f'{k:03d}.rep.json'))

class TestCommands(unittest.TestCase):
    def _get_path(self, file):
        return os.path.join(os.path.dirname(os.path.realpath(__file__)), file)

    def setUp(self):
        self.temp = tempfile.TemporaryDirectory()
        self.output = os.path.join(self.temp.name, 'out')

    def tearDown(self):
        self.temp.cleanup()

    def _write_json(self, name, data):
        path = os.path.join(self.temp.name, name)
        with open(path, 'w') as f:
            json.dump(data, f)
        return path

    def test_invalid_config(self):
        self.assertRaises(ValueError, lambda: Commands(RunConfig(grid=9)))

    def test_straighten2d(self):
        commands = Commands(RunConfig(output=self.output))
        with warnings.catch_warnings():
            warnings.simplefilter('ignore')
            model = commands.straighten2d(self._get_path('data/polygon.csv'), 15, 2)
        self.assertEqual(15, len(model.chords))
        directory = os.path.join(self.output, 'polygon')
        for name in ('gc2d.json', 'gc2d.svg', 'straightened.svg', 'config.json'):
            self.assertTrue(os.path.isfile(os.path.join(directory, name)), name)
        with open(os.path.join(directory, 'gc2d.json')) as f:
            self.assertIn('straightened', json.load(f))

    def test_synth_object(self):
        commands = Commands(RunConfig(output=self.output))
        written = commands.synth(self._write_json('spec.json', {'radii': [2.0, 1.0, 0.5], 'bend': {'angle': 30.0}, 'resolution': 1}))
        self.assertEqual([os.path.join(self.output, 'object', '000.obj')], written)
        self.assertTrue(os.path.isfile(os.path.join(self.output, 'object', 'manifest.json')))
        self.assertTrue(os.path.isfile(os.path.join(self.output, 'config.json')))

    def test_synth_cohorts(self):
        commands = Commands(RunConfig(output=self.output))
        written = commands.synth(self._write_json('cohorts.json', {'n_per_group': 2, 'seed': 3, 'resolution': 1}))
        self.assertEqual(4, len(written))
        self.assertEqual(['000.obj', '001.obj'], sorted(os.listdir(os.path.join(self.output, 'b')))[:2])

    def test_cohort_from_reps(self):
        write_cohort_reps(os.path.join(self.temp.name, 'a'), np.random.default_rng(0), 5)
        commands = Commands(RunConfig(output=self.output))
        reps = commands.cohort(os.path.join(self.temp.name, 'a'), 'a')
        self.assertEqual(5, len(reps))
        self.assertEqual(9, reps[0].frame_count)

    def test_test(self):
        rng = np.random.default_rng(1)
        write_cohort_reps(os.path.join(self.temp.name, 'a'), rng, 12)
        write_cohort_reps(os.path.join(self.temp.name, 'b'), rng, 12, spoke_scale=1.3)
        commands = Commands(RunConfig(output=self.output, permutations=100, normalize=False))
        report = commands.test(os.path.join(self.temp.name, 'a'), os.path.join(self.temp.name, 'b'))
        self.assertTrue(report.significant)
        with open(os.path.join(self.output, 'test.json')) as f:
            self.assertEqual(report.global_result.p_value, json.load(f)['global']['p_value'])
        with open(os.path.join(self.output, 'partial.csv')) as f:
            self.assertEqual(1 + len(report.partial), len(f.read().splitlines()))

    def test_classify(self):
        rng = np.random.default_rng(2)
        write_cohort_reps(os.path.join(self.temp.name, 'a'), rng, 10)
        write_cohort_reps(os.path.join(self.temp.name, 'b'), rng, 10, spoke_scale=2.0)
        commands = Commands(RunConfig(output=self.output, folds=5, normalize=False, classifier='naive_bayes'))
        report = commands.classify(os.path.join(self.temp.name, 'a'), os.path.join(self.temp.name, 'b'))
        self.assertGreaterEqual(report.accuracy, 0.9)
        self.assertTrue(os.path.isfile(os.path.join(self.output, 'features.csv')))

    def test_written_reps_load(self):
        write_cohort_reps(os.path.join(self.temp.name, 'a'), np.random.default_rng(3), 1)
        rep = read_rep(os.path.join(self.temp.name, 'a', '000.rep.json'))
        self.assertEqual(8, rep.connection_count)

if __name__ == '__main__':
    unittest.main()
