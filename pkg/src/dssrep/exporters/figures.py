import io
from typing import Optional

from matplotlib.figure import Figure
import numpy as np

from ..boundary_division import Part
from ..gc2d import Gc2dError, Gc2dModel, medial_spokes_2d, straighten_2d
from ..mesh_core import TriangleMesh
from ..sweep_fit import SkeletalSheet, SpokeGrid

TOP_COLOR = '#d62728'
BOTTOM_COLOR = '#1f77b4'
SKELETON_COLOR = '#2ca02c'

def _figure(width:float=6.0, height:float=4.0) -> Figure:
    figure = Figure(figsize=(width, height))
    axes = figure.add_subplot()
    axes.set_aspect('equal')
    axes.axis('off')
    return figure

def _closed(points:np.ndarray) -> np.ndarray:
    return np.vstack([points, points[:1]])

def draw_gc2d(model:Gc2dModel, spokes:bool=True) -> Figure:
    """
    Draws the polygon colored by part, the relaxed center curve, the semi-chords and, optionally, the
    medial spokes at the chord stations.
    """
    figure = _figure()
    axes = figure.axes[0]
    polygon = model.polygon
    points = polygon.points
    edges = np.stack([points, np.roll(points, -1, axis=0)], axis=1)
    if polygon.labels is None:
        colors = ['black'] * len(edges)
    else:
        top = (polygon.labels == Part.TOP) & (np.roll(polygon.labels, -1) == Part.TOP)
        colors = [TOP_COLOR if t else BOTTOM_COLOR for t in top]
    for edge, color in zip(edges, colors):
        axes.plot(edge[:, 0], edge[:, 1], color=color, linewidth=1.2)

    curve = model.curve
    samples = curve.point(np.linspace(0.0, curve.length, 200))
    axes.plot(samples[:, 0], samples[:, 1], color=SKELETON_COLOR, linewidth=1.5)
    for chord in model.chords:
        segment = np.stack([chord.down_tip, chord.up_tip])
        axes.plot(segment[:, 0], segment[:, 1], color='gray', linewidth=0.7)
    axes.plot(model.skeleton[:, 0], model.skeleton[:, 1], '.', color=SKELETON_COLOR, markersize=3)

    if spokes:
        try:
            pairs = medial_spokes_2d(curve, model.radius, len(model.chords), model.lengths)
        except Gc2dError:
            pairs = []
        for up, down in pairs:
            for spoke in (up, down):
                segment = np.stack([spoke.tail, spoke.tip])
                axes.plot(segment[:, 0], segment[:, 1], color='black', linewidth=0.5, alpha=0.6)
    return figure

def draw_straightened(model:Gc2dModel) -> Figure:
    figure = _figure(8.0, 3.0)
    axes = figure.axes[0]
    flat = straighten_2d(model)
    outline = _closed(flat.outline)
    axes.plot(outline[:, 0], outline[:, 1], color='black', linewidth=1.2)
    axes.plot(flat.spine[:, 0], flat.spine[:, 1], color=SKELETON_COLOR, linewidth=1.5)
    for up, down in zip(flat.up_tips, flat.down_tips):
        axes.plot([down[0], up[0]], [down[1], up[1]], color='gray', linewidth=0.7)
    return figure

def write_svg(model:Gc2dModel, path:str, spokes:bool=True) -> None:
    draw_gc2d(model, spokes).savefig(path, format='svg', bbox_inches='tight')

def write_straightened_svg(model:Gc2dModel, path:str) -> None:
    draw_straightened(model).savefig(path, format='svg', bbox_inches='tight')

def draw_fit(sheet:SkeletalSheet, spokes:SpokeGrid, mesh:Optional[TriangleMesh]=None) -> Figure:
    """Draws the fit projected onto the sheet's first principal plane, seen from the top part."""
    figure = _figure(7.0, 4.0)
    axes = figure.axes[0]
    surface = sheet.surface
    project = lambda points: surface.uv(np.atleast_2d(points))
    if mesh is not None:
        uv = project(mesh.vertices)
        axes.plot(uv[:, 0], uv[:, 1], ',', color='lightgray')
    for vein in sheet.sections.right_veins + sheet.sections.left_veins:
        uv = project(vein)
        axes.plot(uv[:, 0], uv[:, 1], color='gray', linewidth=0.7)
    spine = project(sheet.spine.points)
    axes.plot(spine[:, 0], spine[:, 1], color=SKELETON_COLOR, linewidth=1.5)
    up = project(spokes.tips_up)
    axes.plot(up[:, 0], up[:, 1], '.', color=TOP_COLOR, markersize=3)
    return figure

def fit_png(sheet:SkeletalSheet, spokes:SpokeGrid, mesh:Optional[TriangleMesh]=None, dpi:int=150) -> io.BytesIO:
    buffer = io.BytesIO()
    draw_fit(sheet, spokes, mesh).savefig(buffer, format='png', dpi=dpi, bbox_inches='tight')
    buffer.seek(0)
    return buffer
