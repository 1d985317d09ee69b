from dataclasses import asdict, dataclass, field
import json
import logging
import os
from typing import List, Optional, Tuple

import numpy as np
import trimesh

from .mesh_core import TriangleMesh, save_mesh
from .modes import MeshFormat
from .util import unit

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = 4
RADII_RANGES = ((1.8, 2.2), (0.9, 1.1), (0.45, 0.55))

class SynthError(ValueError):
    """Raised for invalid synthetic object parameters."""
    pass

@dataclass
class Protrusion():
    """A smooth bump pushed out along the surface normals inside a cap."""

    direction:Tuple[float, float, float] = (0.6, 0.0, 0.8)
    """Cap center, as a direction on the unit sphere the ellipsoid is scaled from."""

    angle:float = 25.0
    """Angular radius of the cap in degrees."""

    height:Optional[float] = None
    """Peak displacement; defaults to 0.3 times the smallest radius."""

@dataclass
class Bend():
    """Rotation of the part beyond an elbow about the z-axis through (elbow, 0), blended over a band."""

    elbow:float = 0.0
    angle:float = 40.0
    """Degrees, positive toward +y."""

    band:Optional[float] = None
    """Width of the blend band centered on the elbow; defaults to 3 * radians(angle) * b."""

@dataclass
class SynthSpec():
    radii:Tuple[float, float, float] = (2.0, 1.0, 0.5)
    protrusion:Optional[Protrusion] = None
    bend:Optional[Bend] = None
    resolution:int = DEFAULT_RESOLUTION
    seed:int = 0

    def __post_init__(self):
        a, b, c = self.radii
        if not a > b > c > 0:
            raise SynthError(f'Radii must satisfy a > b > c > 0, got {self.radii}')
        if self.protrusion is not None and self.protrusion_height >= c:
            raise SynthError(f'Protrusion height must be below c = {c}')
        if self.bend is not None and not 0.0 <= self.bend.angle <= 80.0:
            raise SynthError(f'Bend angle must be within [0, 80] degrees, got {self.bend.angle}')

    @property
    def protrusion_height(self) -> float:
        if self.protrusion is None:
            return 0.0
        return 0.3 * self.radii[2] if self.protrusion.height is None else float(self.protrusion.height)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data:dict) -> 'SynthSpec':
        data = dict(data)
        if data.get('protrusion') is not None:
            data['protrusion'] = Protrusion(**data['protrusion'])
        if data.get('bend') is not None:
            data['bend'] = Bend(**data['bend'])
        if 'radii' in data:
            data['radii'] = tuple(data['radii'])
        return cls(**data)

def make_ellipsoid(radii=(2.0, 1.0, 0.5), resolution:int=DEFAULT_RESOLUTION) -> TriangleMesh:
    """Returns an icosphere of the given subdivision level scaled by radii along x, y and z."""
    a, b, c = radii
    if not a > b > c > 0:
        raise SynthError(f'Radii must satisfy a > b > c > 0, got {tuple(radii)}')
    sphere = trimesh.creation.icosphere(subdivisions=resolution, radius=1.0)
    return TriangleMesh(np.asarray(sphere.vertices) * np.array(radii, dtype=float), np.asarray(sphere.faces))

def _smoothstep(s:np.ndarray) -> np.ndarray:
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)

def protrusion_profile(angles:np.ndarray, radius:float) -> np.ndarray:
    """Gaussian bump of sigma radius/2, shifted so it falls to exactly 0 at the cap edge and stays 0 outside; peak 1."""
    sigma = 0.5 * radius
    floor = np.exp(-radius ** 2 / (2 * sigma ** 2))
    values = (np.exp(-angles ** 2 / (2 * sigma ** 2)) - floor) / (1.0 - floor)
    return np.where(angles < radius, values, 0.0)

def cap_mask(vertices:np.ndarray, radii, protrusion:Protrusion) -> np.ndarray:
    """Returns the vertices whose sphere direction lies within the protrusion cap."""
    return _cap_angles(vertices, radii, protrusion) < np.radians(protrusion.angle)

def _cap_angles(vertices:np.ndarray, radii, protrusion:Protrusion) -> np.ndarray:
    directions = unit(np.asarray(vertices) / np.asarray(radii, dtype=float))
    center = unit(np.asarray(protrusion.direction, dtype=float))
    return np.arccos(np.clip(directions @ center, -1.0, 1.0))

def bend_points(points:np.ndarray, bend:Bend, b:float) -> np.ndarray:
    """Applies the blended elbow rotation to points."""
    points = np.array(points, dtype=float)
    theta = np.radians(bend.angle)
    band = 3.0 * theta * b if bend.band is None else float(bend.band)
    if theta == 0:
        return points
    phi = theta * _smoothstep((points[:, 0] - bend.elbow + 0.5 * band) / band)
    dx = points[:, 0] - bend.elbow
    dy = points[:, 1].copy()
    points[:, 0] = bend.elbow + np.cos(phi) * dx - np.sin(phi) * dy
    points[:, 1] = np.sin(phi) * dx + np.cos(phi) * dy
    return points

def deform(mesh:TriangleMesh, spec:SynthSpec) -> TriangleMesh:
    """Applies the protrusion of spec (along vertex normals) and then its bend."""
    vertices = np.array(mesh.vertices)
    if spec.protrusion is not None:
        angles = _cap_angles(vertices, spec.radii, spec.protrusion)
        lift = spec.protrusion_height * protrusion_profile(angles, np.radians(spec.protrusion.angle))
        vertices = vertices + lift[:, None] * mesh.vertex_normals
    if spec.bend is not None:
        vertices = bend_points(vertices, spec.bend, spec.radii[1])
    return TriangleMesh(vertices, mesh.faces)

def make_object(spec:SynthSpec) -> TriangleMesh:
    return deform(make_ellipsoid(spec.radii, spec.resolution), spec)

def sample_radii(rng:np.random.Generator) -> Tuple[float, float, float]:
    while True:
        radii = tuple(float(rng.uniform(lo, hi)) for lo, hi in RADII_RANGES)
        if radii[0] > radii[1] > radii[2]:
            return radii

@dataclass
class Cohorts():
    a:List[TriangleMesh]
    b:List[TriangleMesh]
    specs_a:List[SynthSpec] = field(default_factory=list)
    specs_b:List[SynthSpec] = field(default_factory=list)
    seed:int = 0

def simulate_groups(n_per_group:int=50, effect:str='protrusion', seed:int=0, resolution:int=DEFAULT_RESOLUTION, protrusion:Optional[Protrusion]=None) -> Cohorts:
    """
    Returns two cohorts of ellipsoids with radii a ~ U(1.8, 2.2), b ~ U(0.9, 1.1), c ~ U(0.45, 0.55).  With
    effect 'protrusion', every object of group B carries the protrusion.  Each object draws from its own
    stream spawned from seed.
    """
    if effect not in ('protrusion', 'none'):
        raise SynthError(f'Unknown effect: {effect}')
    if n_per_group < 1:
        raise SynthError('Need at least one object per group')
    streams = np.random.SeedSequence(seed).spawn(2 * n_per_group)
    bump = protrusion if protrusion is not None else Protrusion()
    cohorts = Cohorts([], [], seed=seed)
    for k, stream in enumerate(streams):
        rng = np.random.default_rng(stream)
        in_b = k >= n_per_group
        spec = SynthSpec(sample_radii(rng), bump if in_b and effect == 'protrusion' else None, None, resolution, int(stream.generate_state(1)[0]))
        mesh = make_object(spec)
        (cohorts.b if in_b else cohorts.a).append(mesh)
        (cohorts.specs_b if in_b else cohorts.specs_a).append(spec)
    logger.info('Simulated %d + %d objects (effect: %s, seed %d)', n_per_group, n_per_group, effect, seed)
    return cohorts

def write_cohort(meshes:List[TriangleMesh], specs:List[SynthSpec], directory:str, format:MeshFormat=MeshFormat.OBJ, seed:Optional[int]=None) -> List[str]:
    """Writes numbered meshes and a manifest.json with every spec and the seed.  Returns the mesh paths."""
    os.makedirs(directory, exist_ok=True)
    fmt = MeshFormat(format)
    paths = []
    for k, mesh in enumerate(meshes):
        path = os.path.join(directory, f'{k:03d}.{fmt.value}')
        save_mesh(mesh, path, fmt)
        paths.append(path)
    with open(os.path.join(directory, 'manifest.json'), 'w') as f:
        json.dump({'seed': seed, 'objects': [{'file': os.path.basename(p), 'spec': s.to_dict()} for p, s in zip(paths, specs)]}, f, indent=2)
    return paths
