import os
import tempfile
import unittest

from dssrep.boundary_division import Part
from dssrep.loaders import Loader, read_polygon_csv

class TestLoader(unittest.TestCase):
    def _get_path(self, file):
        return os.path.join(os.path.dirname(os.path.realpath(__file__)), file)

    def test_list_directory(self):
        names = [os.path.basename(entry) for entry in Loader().list_path(self._get_path('data'))]
        self.assertEqual(['cube.obj', 'nonmanifold.obj', 'open.obj'], names)

    def test_list_glob(self):
        self.assertEqual(1, len(list(Loader().list_path(self._get_path('data/cu*.obj')))))
        self.assertRaises(ValueError, lambda: list(Loader().list_path(self._get_path('data/*.stl'))))
        self.assertEqual(2, len(Loader().list_paths([self._get_path('data/cube.obj'), self._get_path('data/open.obj')])))

    def test_recursive(self):
        with tempfile.TemporaryDirectory() as directory:
            os.makedirs(os.path.join(directory, 'a', 'b'))
            open(os.path.join(directory, 'a', 'b', 'x.obj'), 'w').close()
            self.assertRaises(ValueError, lambda: list(Loader().list_path(directory)))
            self.assertEqual(1, len(list(Loader(recursive=True).list_path(directory))))

    def test_rep_directory(self):
        with tempfile.TemporaryDirectory() as directory:
            self.assertFalse(Loader().is_rep_directory(directory))
            os.makedirs(os.path.join(directory, '000'))
            open(os.path.join(directory, '000', 'rep.json'), 'w').close()
            self.assertTrue(Loader().is_rep_directory(directory))
        self.assertFalse(Loader().is_rep_directory(self._get_path('data')))

    def test_meshes(self):
        meshes = Loader().meshes(self._get_path('data/cube.obj'))
        self.assertEqual([8], [m.vertex_count for m in meshes])

class TestPolygonCsv(unittest.TestCase):
    def _write(self, directory, text):
        path = os.path.join(directory, 'polygon.csv')
        with open(path, 'w') as f:
            f.write(text)
        return path

    def test_labelled(self):
        polygon = read_polygon_csv(os.path.join(os.path.dirname(os.path.realpath(__file__)), 'data', 'polygon.csv'))
        self.assertEqual(80, len(polygon.points))
        self.assertEqual({int(Part.TOP), int(Part.BOTTOM)}, set(polygon.labels.tolist()))

    def test_plain(self):
        with tempfile.TemporaryDirectory() as directory:
            polygon = read_polygon_csv(self._write(directory, '0,0\n1,0\n\n0,1\n'))
        self.assertEqual((3, 2), polygon.points.shape)
        self.assertIsNone(polygon.labels)

    def test_invalid(self):
        with tempfile.TemporaryDirectory() as directory:
            self.assertRaises(ValueError, lambda: read_polygon_csv(self._write(directory, 'x,y\n0,0\n1,0\n')))
            self.assertRaises(ValueError, lambda: read_polygon_csv(self._write(directory, '0,0\n1,0,top\n0,1\n')))
            self.assertRaises(ValueError, lambda: read_polygon_csv(self._write(directory, '0,0,top\n1,0,bottom\n0,1,left\n')))

if __name__ == '__main__':
    unittest.main()
