import csv
import glob
import os
from typing import Generator, Iterable, List, Optional

import numpy as np

from .boundary_division import Part
from .gc2d import Polygon2D
from .lp_dssrep import LpDssRep, read_rep
from .mesh_core import TriangleMesh, load_mesh

MESH_PATTERNS = ['*.obj', '*.ply']
REP_PATTERNS = ['rep.json', '*/rep.json', '*.rep.json']

class Loader():
    """Finds and reads the input files of a run."""

    def __init__(self, recursive:bool=False):
        self.recursive = recursive
        """Whether glob patterns and directory scans descend into subdirectories."""

    def list_path(self, glob_path:Optional[str]=None, patterns:Iterable[str]=MESH_PATTERNS) -> Generator[str, None, None]:
        """
        Returns a generator that yields the names of files matching the given glob pattern path.

        If a glob pattern path is not provided or resolves to a directory, every pattern in patterns is
        tried inside it and the matches of all patterns are combined.

        Raises a ValueError if nothing is matched.
        """
        entries = []
        if glob_path is None or os.path.isdir(glob_path):
            root = glob_path if glob_path is not None else os.getcwd()
            for pattern in patterns:
                if self.recursive:
                    pattern = os.path.join('**', pattern)
                entries.extend(glob.glob(os.path.join(root, pattern), recursive=self.recursive))
        else:
            entries = glob.glob(glob_path, recursive=self.recursive)

        if len(entries) == 0:
            raise ValueError(f'No files matched path {glob_path}')

        for entry in sorted(set(entries)):
            yield os.fspath(entry)

    def list_paths(self, paths:Iterable[str], patterns:Iterable[str]=MESH_PATTERNS) -> List[str]:
        patterns = list(patterns)
        return [entry for path in paths for entry in self.list_path(path, patterns)]

    def is_rep_directory(self, path:str) -> bool:
        """Tells whether path holds fitted reps rather than meshes."""
        try:
            next(self.list_path(path, REP_PATTERNS))
            return True
        except ValueError:
            return False

    def meshes(self, path:str) -> List[TriangleMesh]:
        return [load_mesh(entry) for entry in self.list_path(path, MESH_PATTERNS)]

    def reps(self, path:str) -> List[LpDssRep]:
        return [read_rep(entry) for entry in self.list_path(path, REP_PATTERNS)]

def _part(cell:str) -> int:
    cell = cell.strip()
    try:
        return int(Part(int(float(cell))))
    except ValueError:
        pass
    try:
        return int(Part[cell.upper()])
    except KeyError:
        raise ValueError(f'Unknown polygon label {cell!r}: use top, bottom, 1 or -1') from None

def read_polygon_csv(path:str) -> Polygon2D:
    """
    Reads a closed 2D polygon from CSV rows of x,y or x,y,label.  Labels are top or bottom (or 1 and -1).
    A header row is skipped when its first cell is not a number.
    """
    with open(path, 'r', newline='') as f:
        rows = [row for row in csv.reader(f) if row and any(cell.strip() for cell in row)]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    if len(rows) < 3:
        raise ValueError(f'A polygon needs at least 3 rows, {path} has {len(rows)}')
    widths = {len(row) for row in rows}
    if len(widths) != 1 or widths.pop() not in (2, 3):
        raise ValueError(f'Every row of {path} must have 2 or 3 columns')
    points = np.array([[float(row[0]), float(row[1])] for row in rows])
    labels = np.array([_part(row[2]) for row in rows]) if len(rows[0]) == 3 else None
    return Polygon2D(points, labels)
