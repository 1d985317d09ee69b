from collections import deque
from dataclasses import dataclass, field, replace
import json
import logging
from typing import List, Optional

import numpy as np
from scipy.spatial.transform import Rotation

from .sweep_fit import SkeletalSheet, SpokeGrid
from .util import arclength, orthonormal_frame, point_at, tangents, unit

logger = logging.getLogger(__name__)

UNIT_TOLERANCE = 1e-9

class RepError(ValueError):
    """Raised for an invalid or inconsistent LP-dss-rep."""
    pass

def to_wxyz(matrices:np.ndarray) -> np.ndarray:
    """Converts rotation matrices to unit quaternions (w, x, y, z) with w >= 0."""
    q = np.atleast_2d(Rotation.from_matrix(matrices).as_quat())[:, [3, 0, 1, 2]]
    return np.where(q[:, :1] < 0, -q, q)

def from_wxyz(quaternions:np.ndarray) -> np.ndarray:
    return Rotation.from_quat(np.atleast_2d(quaternions)[:, [1, 2, 3, 0]]).as_matrix()

@dataclass(eq=False)
class LocalFrame():
    """A skeletal frame in world coordinates.  rotation has the columns (n, b, b-perp)."""

    rotation:np.ndarray
    origin:np.ndarray
    parent:int
    """Index of the parent frame, or -1 for the root."""

@dataclass(eq=False)
class Pose():
    """World placement of a rep: the root frame and every frame origin.  Never part of the GOP tuple."""

    root_origin:np.ndarray
    root_rotation:np.ndarray
    """Unit quaternion (w, x, y, z)."""

    origins:np.ndarray

@dataclass(eq=False)
class LpDssRep():
    """
    A locally parameterized discrete swept skeletal representation.

    Frames are stored relative to their parent, as unit quaternions (w, x, y, z); the root's relative frame
    is the identity.  Connection j belongs to the j-th non-root node in node order and holds the vector
    from the parent origin to the child origin in the parent frame.  Only up spoke directions are stored;
    the down spoke direction of every node is the negated up direction.
    """

    parents:np.ndarray
    nodes:np.ndarray
    """(n_f, 3) integer rows (interior station, side, step): side is 0 on the spine, -1 right, +1 left."""

    frames:np.ndarray
    connection_dirs:np.ndarray
    connection_lens:np.ndarray
    spoke_dirs:np.ndarray
    spoke_lens:np.ndarray
    """(n_f, 2) up and down spoke lengths."""

    meta:dict = field(default_factory=dict)
    pose:Optional[Pose] = None

    def __post_init__(self):
        self.parents = np.asarray(self.parents, dtype=int)
        self.nodes = np.asarray(self.nodes, dtype=int).reshape(-1, 3)
        self.frames = np.asarray(self.frames, dtype=float).reshape(-1, 4)
        self.connection_dirs = np.asarray(self.connection_dirs, dtype=float).reshape(-1, 3)
        self.connection_lens = np.asarray(self.connection_lens, dtype=float)
        self.spoke_dirs = np.asarray(self.spoke_dirs, dtype=float).reshape(-1, 3)
        self.spoke_lens = np.asarray(self.spoke_lens, dtype=float).reshape(-1, 2)
        self._validate()

    def _validate(self) -> None:
        n_f = len(self.parents)
        n_c = n_f - 1
        sizes = (len(self.frames), len(self.connection_dirs), len(self.connection_lens), len(self.spoke_dirs), len(self.spoke_lens), len(self.nodes))
        if sizes != (n_f, n_c, n_c, n_f, n_f, n_f):
            raise RepError(f'Tuple sizes {sizes} do not match {n_f} frames and {n_c} connections')
        if np.count_nonzero(self.parents < 0) != 1:
            raise RepError('An LP-dss-rep needs exactly one root frame')
        if np.any(self.parents >= n_f) or np.any(self.parents == np.arange(n_f)):
            raise RepError('Invalid parent index')
        for name, vectors in (('frame', self.frames), ('connection direction', self.connection_dirs), ('spoke direction', self.spoke_dirs)):
            if len(vectors) and np.abs(np.linalg.norm(vectors, axis=1) - 1.0).max() > UNIT_TOLERANCE:
                raise RepError(f'Every {name} must have unit length')
        if np.any(self.connection_lens <= 0) or np.any(self.spoke_lens <= 0):
            raise RepError('All lengths must be positive')
        if len(self.order) != n_f:
            raise RepError('The frame tree is not connected')
        children = np.bincount(self.parents[self.parents >= 0], minlength=n_f)
        if children.max(initial=0) > 3:
            raise RepError('A frame has more than three children')

    @property
    def frame_count(self) -> int:
        return len(self.parents)

    @property
    def connection_count(self) -> int:
        return len(self.connection_lens)

    @property
    def root(self) -> int:
        return int(np.flatnonzero(self.parents < 0)[0])

    @property
    def connection_nodes(self) -> np.ndarray:
        """The child node of every connection."""
        return np.flatnonzero(self.parents >= 0)

    @property
    def order(self) -> List[int]:
        """Node indices in breadth-first order from the root."""
        children = [[] for _ in self.parents]
        for child, parent in enumerate(self.parents):
            if parent >= 0:
                children[parent].append(child)
        order = []
        queue = deque(np.flatnonzero(self.parents < 0)[:1].tolist())
        while queue:
            node = queue.popleft()
            order.append(node)
            queue.extend(children[node])
        return order

    @property
    def rotations(self) -> np.ndarray:
        """Relative frames as (n_f, 3, 3) rotation matrices."""
        return from_wxyz(self.frames)

    @property
    def lengths(self) -> np.ndarray:
        """All n_c + 2 n_f lengths: connections, then up/down spoke pairs."""
        return np.concatenate([self.connection_lens, self.spoke_lens.ravel()])

    def same_topology(self, other:'LpDssRep') -> bool:
        return np.array_equal(self.parents, other.parents) and np.array_equal(self.nodes, other.nodes)

    def local_frames(self) -> List[LocalFrame]:
        """Returns the frames in world coordinates, placed by the pose when there is one."""
        root_origin = np.zeros(3) if self.pose is None else self.pose.root_origin
        root_rotation = np.eye(3) if self.pose is None else from_wxyz(self.pose.root_rotation)[0]
        origins, rotations = _compose(self, root_origin, root_rotation)
        return [LocalFrame(r, o, int(p)) for r, o, p in zip(rotations, origins, self.parents)]

def _compose(rep:LpDssRep, root_origin:np.ndarray, root_rotation:np.ndarray):
    relative = rep.rotations
    connection = np.full(rep.frame_count, -1)
    connection[rep.connection_nodes] = np.arange(rep.connection_count)
    origins = np.zeros((rep.frame_count, 3))
    rotations = np.zeros((rep.frame_count, 3, 3))
    for node in rep.order:
        parent = rep.parents[node]
        if parent < 0:
            origins[node] = root_origin
            rotations[node] = root_rotation @ relative[node]
            continue
        j = connection[node]
        origins[node] = origins[parent] + rotations[parent] @ (rep.connection_lens[j] * rep.connection_dirs[j])
        rotations[node] = rotations[parent] @ relative[node]
    return origins, rotations

def reconstruct_origins(rep:LpDssRep, root_origin:Optional[np.ndarray]=None, root_rotation:Optional[np.ndarray]=None) -> np.ndarray:
    """
    Composes the connection vectors outward from the root.  Without an explicit placement the rep's pose
    is used, and without a pose the root frame is the world frame at the origin.
    """
    if root_origin is None:
        root_origin = np.zeros(3) if rep.pose is None else rep.pose.root_origin
    if root_rotation is None:
        root_rotation = np.eye(3) if rep.pose is None else from_wxyz(rep.pose.root_rotation)[0]
    return _compose(rep, np.asarray(root_origin, dtype=float), np.asarray(root_rotation, dtype=float))[0]

def tree_topology(interior:int, samples_per_vein:int):
    """
    Returns (parents, nodes) of the frame tree for interior spine stations and samples_per_vein frames per
    vein side.  Node order is, for each interior station, the spine node, then the right vein from the spine
    outward, then the left vein.  The root is the spine node of the central station; its children are its
    two spine neighbors and the first sample of its right vein.  The left vein of the central station hangs
    off that first right sample, so no frame has more than three children.
    """
    if interior < 1 or interior % 2 == 0:
        raise RepError(f'Need an odd number of interior stations, got {interior}')
    m = samples_per_vein
    per_station = 1 + 2 * m
    center = interior // 2
    parents = []
    nodes = []
    for k in range(interior):
        spine = k * per_station
        if k == center:
            parents.append(-1)
        else:
            parents.append((k + 1 if k < center else k - 1) * per_station)
        nodes.append((k, 0, 0))
        for side, offset in ((-1, 1), (1, 1 + m)):
            for j in range(1, m + 1):
                if j > 1:
                    parents.append(spine + offset + j - 2)
                elif k == center and side > 0:
                    parents.append(spine + 1)
                else:
                    parents.append(spine)
                nodes.append((k, side, j))
    return np.array(parents), np.array(nodes)

def _vein_tangent(vein:np.ndarray, fraction:float) -> np.ndarray:
    table = arclength(vein)
    return unit(point_at(tangents(vein), table, fraction * table[-1]))

def build_lp_dssrep(sheet:SkeletalSheet, spokes:SpokeGrid) -> LpDssRep:
    """
    Parameterizes a fitted sheet and its spokes into an LP-dss-rep.

    Every frame has n along the sheet normal and b along its curve: the spine tangent for spine frames, the
    vein tangent, running from the right crest to the left crest, for vein frames.  b-perp = n x b after one
    Gram-Schmidt pass.
    """
    stations = len(sheet.spine.stations)
    if stations % 2 == 0:
        raise RepError(f'The spine needs an odd number of stations for a central root, got {stations}')
    interior = stations - 2
    m = int(spokes.step.max())
    parents, nodes = tree_topology(interior, m)
    if len(spokes.sites) != len(parents):
        raise RepError(f'Expected {len(parents)} spoke sites, got {len(spokes.sites)}')

    normals = sheet.surface.normal(sheet.surface.uv(spokes.sites))
    sections = sheet.sections
    along = np.zeros((len(parents), 3))
    for i, (k, side, j) in enumerate(nodes):
        if side == 0:
            along[i] = sheet.spine.tangents[k + 1]
        else:
            vein = sections.left_veins[k + 1] if side > 0 else sections.right_veins[k + 1]
            along[i] = side * _vein_tangent(vein, j / (m + 1))
    rotations = orthonormal_frame(normals, along)

    origins = spokes.sites
    children = np.flatnonzero(parents >= 0)
    offsets = np.einsum('nji,nj->ni', rotations[parents[children]], origins[children] - origins[parents[children]])
    relative = np.einsum('nji,njk->nik', rotations[np.maximum(parents, 0)], rotations)
    root = int(np.flatnonzero(parents < 0)[0])
    relative[root] = np.eye(3)
    spoke_dirs = np.einsum('nji,nj->ni', rotations, spokes.directions)

    meta = {
        'mode': sheet.mode.value,
        'degrees': list(sheet.degrees),
        'stations': stations,
        'vein_samples': m,
        'delta': float(sheet.delta),
    }
    pose = Pose(origins[root].copy(), to_wxyz(rotations[root])[0], origins.copy())
    rep = LpDssRep(parents, nodes, to_wxyz(relative), unit(offsets), np.linalg.norm(offsets, axis=1), unit(spoke_dirs),
                   np.stack([spokes.up_lengths, spokes.down_lengths], axis=1), meta, pose)
    logger.info('LP-dss-rep with %d frames and %d connections, LP-size %.4g', rep.frame_count, rep.connection_count, lp_size(rep))
    return rep

def lp_size(rep:LpDssRep) -> float:
    """Returns the geometric mean of all connection and spoke lengths."""
    return float(np.exp(np.mean(np.log(rep.lengths))))

def normalize(rep:LpDssRep) -> LpDssRep:
    """Divides every length by the LP-size; directions, frames and the pose stay as they are."""
    size = lp_size(rep)
    return replace(rep, connection_lens=rep.connection_lens / size, spoke_lens=rep.spoke_lens / size, meta=dict(rep.meta, size=size))

def node_label(node) -> str:
    k, side, j = (int(x) for x in node)
    if side == 0:
        return f's{k}'
    return f's{k}{"R" if side < 0 else "L"}{j}'

def gop_ids(rep:LpDssRep) -> List[str]:
    """
    Names every GOP in partial-test order: frames, connection directions, spoke directions, connection
    lengths and spoke length pairs.  Connections are named after their child node.
    """
    frames = [node_label(n) for n in rep.nodes]
    connections = [node_label(rep.nodes[i]) for i in rep.connection_nodes]
    return ([f'frame:{n}' for n in frames] + [f'connection_dir:{n}' for n in connections] + [f'spoke_dir:{n}' for n in frames]
            + [f'connection_len:{n}' for n in connections] + [f'spoke_len:{n}' for n in frames])

def to_feature_vector(rep:LpDssRep, include_size:bool=False, size:Optional[float]=None) -> np.ndarray:
    """
    Flattens a rep into its 9 n_f + 4 n_c classification features: frame quaternions, connection and
    spoke directions, connection lengths and spoke length pairs.  include_size appends log LP-size, taken
    from size, from the size a normalized rep remembers, or from the rep itself.
    """
    features = [to_wxyz(rep.rotations).ravel(), rep.connection_dirs.ravel(), rep.spoke_dirs.ravel(), rep.connection_lens, rep.spoke_lens.ravel()]
    if include_size:
        if size is None:
            size = rep.meta.get('size') or lp_size(rep)
        features.append([np.log(size)])
    return np.concatenate(features)

def rep_to_dict(rep:LpDssRep) -> dict:
    data = {
        'topology': {'parents': rep.parents.tolist(), 'nodes': rep.nodes.tolist()},
        'frames': rep.frames.tolist(),
        'connection_dirs': rep.connection_dirs.tolist(),
        'connection_lens': rep.connection_lens.tolist(),
        'spoke_dirs': rep.spoke_dirs.tolist(),
        'spoke_lens': rep.spoke_lens.tolist(),
        'meta': rep.meta,
    }
    if rep.pose is not None:
        data['pose'] = {'root_origin': rep.pose.root_origin.tolist(), 'root_rotation': np.asarray(rep.pose.root_rotation).tolist(), 'origins': rep.pose.origins.tolist()}
    return data

def rep_from_dict(data:dict) -> LpDssRep:
    try:
        pose = data.get('pose')
        if pose is not None:
            pose = Pose(np.array(pose['root_origin']), np.array(pose['root_rotation']), np.array(pose['origins']))
        return LpDssRep(data['topology']['parents'], data['topology']['nodes'], data['frames'], data['connection_dirs'], data['connection_lens'],
                        data['spoke_dirs'], data['spoke_lens'], data.get('meta', {}), pose)
    except KeyError as e:
        raise RepError(f'Missing field in LP-dss-rep data: {e}')

def write_rep(rep:LpDssRep, path:str) -> None:
    with open(path, 'w') as f:
        json.dump(rep_to_dict(rep), f, indent=1)

def read_rep(path:str) -> LpDssRep:
    with open(path, 'r') as f:
        return rep_from_dict(json.load(f))
