import json
import os
import tempfile
import unittest
from argparse import Namespace
from unittest import mock

from dssrep.config import THREADS_VARIABLE, ConfigError, RunConfig
from dssrep.modes import Correction, PlaneMode

class TestRunConfig(unittest.TestCase):
    def _write(self, directory, text):
        path = os.path.join(directory, 'run.json')
        with open(path, 'w') as f:
            f.write(text)
        return path

    def test_defaults(self):
        config = RunConfig()
        self.assertEqual(0.5, config.delta)
        self.assertEqual(PlaneMode.RELAXED_SPINE_CHORDAL_PLANES, config.mode)
        self.assertEqual((15, 3), (config.stations, config.vein_samples))
        self.assertIs(config, config.validate())

    def test_coercion(self):
        config = RunConfig(correction='bonferroni', degrees=[2, 3], inputs='meshes/*.obj')
        self.assertEqual(Correction.BONFERRONI, config.correction)
        self.assertEqual((2, 3), config.degrees)
        self.assertEqual(['meshes/*.obj'], config.inputs)
        self.assertRaises(ConfigError, lambda: RunConfig(mode='curved'))

    def test_from_file(self):
        with tempfile.TemporaryDirectory() as directory:
            config = RunConfig.from_file(self._write(directory, '{"delta": 0.25, "grid": 3}'))
            self.assertEqual((0.25, 3), (config.delta, config.grid))
            self.assertRaises(ConfigError, lambda: RunConfig.from_file(self._write(directory, '{"delta": 0.25, "speed": 3}')))
            self.assertRaises(ConfigError, lambda: RunConfig.from_file(self._write(directory, '{"delta": ')))
            self.assertRaises(ConfigError, lambda: RunConfig.from_file(self._write(directory, '[1, 2]')))

    def test_merge(self):
        merged = RunConfig(delta=0.25, grid=3).merge(Namespace(grid=5, delta=None, command='fit'))
        self.assertEqual((0.25, 5), (merged.delta, merged.grid))

    def test_validate(self):
        with self.assertRaises(ConfigError) as context:
            RunConfig(stations=4, alpha=1.5).validate()
        message = str(context.exception)
        self.assertIn('stations must be odd', message)
        self.assertIn('alpha must be in (0, 1)', message)
        self.assertIn('; ', message)
        self.assertRaises(ConfigError, lambda: RunConfig(degrees=(2, 9)).validate())

    def test_write(self):
        config = RunConfig(degrees=(2, 2), correction=Correction.BONFERRONI)
        with tempfile.TemporaryDirectory() as directory:
            path = config.write(os.path.join(directory, 'run'))
            with open(path) as f:
                data = json.load(f)
        self.assertEqual('config.json', os.path.basename(path))
        self.assertEqual([2, 2], data['degrees'])
        self.assertEqual('bonferroni', data['correction'])
        self.assertEqual(config.to_dict(), RunConfig(**data).to_dict())

    def test_threads(self):
        with mock.patch.dict(os.environ, {THREADS_VARIABLE: '4'}):
            self.assertEqual(4, RunConfig().threads)
        with mock.patch.dict(os.environ, {THREADS_VARIABLE: 'many'}):
            self.assertRaises(ConfigError, lambda: RunConfig())

if __name__ == '__main__':
    unittest.main()
