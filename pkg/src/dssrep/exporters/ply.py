import os
from typing import Dict, Iterable, Optional

import numpy as np
import trimesh

from ..cms import CmsPointSet
from ..sweep_fit import SkeletalSheet, SpokeGrid

class PLYExporter():
    """Writes point clouds of a fitted skeletal structure for inspection in a mesh viewer."""

    def __init__(self, directory:str):
        self.directory = directory

    def export_points(self, points:np.ndarray, name:str, colors:Optional[np.ndarray]=None) -> str:
        """Writes points to <directory>/<name>.ply and returns the path."""
        os.makedirs(self.directory, exist_ok=True)
        path = os.path.join(self.directory, f'{name}.ply')
        cloud = trimesh.PointCloud(np.asarray(points, dtype=float).reshape(-1, 3), colors=colors)
        cloud.export(path, file_type='ply')
        return path

    def export_polylines(self, polylines:Iterable[np.ndarray], name:str) -> str:
        """Writes the points of every polyline with one color per polyline."""
        polylines = [np.asarray(p, dtype=float).reshape(-1, 3) for p in polylines]
        palette = trimesh.visual.color.interpolate(np.linspace(0.0, 1.0, max(len(polylines), 1)), color_map='viridis')
        colors = np.vstack([np.repeat(palette[[k]], len(p), axis=0) for k, p in enumerate(polylines)])
        return self.export_points(np.vstack(polylines), name, colors)

    def export_fit(self, sheet:SkeletalSheet, spokes:SpokeGrid, cms:Optional[CmsPointSet]=None) -> Dict[str, str]:
        """Writes cms.ply (when given), spine.ply, veins.ply, tips_up.ply and tips_down.ply."""
        written = {}
        if cms is not None:
            written['cms'] = self.export_points(cms.points, 'cms')
        written['spine'] = self.export_points(sheet.spine.points, 'spine')
        sections = sheet.sections
        written['veins'] = self.export_polylines(sections.right_veins + sections.left_veins, 'veins')
        written['tips_up'] = self.export_points(spokes.tips_up, 'tips_up')
        written['tips_down'] = self.export_points(spokes.tips_down, 'tips_down')
        return written

