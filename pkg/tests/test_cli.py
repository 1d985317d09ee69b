import io
import os
import tempfile
import unittest
import warnings
from contextlib import redirect_stdout

from dssrep.cli import CLI
from dssrep.version import VERSION

class TestCLI(unittest.TestCase):
    def _get_path(self, file):
        return os.path.join(os.path.dirname(os.path.realpath(__file__)), file)

    def run_cli(self, *args):
        out = io.StringIO()
        with redirect_stdout(out):
            status = CLI().parse_args(list(args))
        return status, out.getvalue()

    def test_version(self):
        status, out = self.run_cli('version')
        self.assertEqual(0, status)
        self.assertEqual(VERSION, out.strip())

    def test_about(self):
        status, out = self.run_cli('about')
        self.assertEqual(0, status)
        self.assertIn('dssrep', out)

    def test_no_command(self):
        status, out = self.run_cli()
        self.assertEqual(0, status)
        self.assertIn('usage', out)

    def test_arguments(self):
        args = CLI().create_argparser().parse_args(['--seed', '7', 'fit', 'a.obj', '--degrees', '2', '3', '--vein-samples', '2'])
        self.assertEqual((7, ['a.obj'], [2, 3], 2), (args.seed, args.inputs, args.degrees, args.vein_samples))
        args = CLI().create_argparser().parse_args(['test', 'a', 'b', '--no-normalize', '--test-method', 'permutation'])
        self.assertEqual((False, 'permutation'), (args.normalize, args.test_method))

    def test_errors(self):
        status, out = self.run_cli('fit')
        self.assertEqual(1, status)
        self.assertIn('No inputs given', out)
        self.assertEqual(1, self.run_cli('fit', '--grid', '9', 'a.obj')[0])
        self.assertEqual(1, self.run_cli('test', 'a')[0])
        self.assertEqual(1, self.run_cli('-c', self._get_path('data/missing.json'), 'fit', 'a.obj')[0])

    def test_straighten2d(self):
        with tempfile.TemporaryDirectory() as directory:
            with warnings.catch_warnings():
                warnings.simplefilter('ignore')
                status, out = self.run_cli('-o', directory, 'straighten2d', self._get_path('data/polygon.csv'), '--count', '15')
            self.assertIn(status, (0, 1))
            self.assertIn('curve length', out)
            self.assertTrue(os.path.isfile(os.path.join(directory, 'polygon', 'gc2d.json')))

if __name__ == '__main__':
    unittest.main()
