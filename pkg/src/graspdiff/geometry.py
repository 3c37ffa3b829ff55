"""Rigid object geometry: meshes, per-frame motion, basis-point-set encoding.

Object rotations are serialized as 6D parameters of the column-convention
matrix R (world = R @ local + t). The motion-transfer formula below is row
vector math, so it uses W_R = R.T, the matrix acting on row-stacked points:
``world_rows = local_rows @ W_R + t``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .body import matrix_to_rot6d, rot6d_to_matrix
from .errors import EmptyGeometry, ShapeError

BPS_COUNT = 1024
BPS_RADIUS = 0.15
BPS_SEED = 42


# ---------------------------------------------------------------------------
# Meshes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectMesh:
    """Triangle mesh with vertices in meters, local (rest) coordinates."""

    vertices: np.ndarray   # (V, 3) float64
    triangles: np.ndarray  # (F, 3) int64

    def __post_init__(self):
        if len(self.vertices) == 0:
            raise EmptyGeometry("mesh has no vertices")
        if self.vertices.shape[-1] != 3:
            raise ShapeError("vertices must be (V, 3)")

    @property
    def centroid(self) -> np.ndarray:
        """Mean of the vertices (the object centroid O in the rest pose)."""
        return self.vertices.mean(axis=0)

    @property
    def circumradius(self) -> float:
        return float(np.linalg.norm(self.vertices - self.centroid, axis=1).max())

    def is_watertight(self) -> bool:
        """Closed orientable surface: every directed edge used exactly once."""
        if len(self.triangles) == 0:
            return False
        tri = self.triangles
        edges = np.concatenate([tri[:, [0, 1]], tri[:, [1, 2]], tri[:, [2, 0]]])
        fwd = set(map(tuple, edges))
        if len(fwd) != len(edges):
            return False
        return all((b, a) in fwd for a, b in fwd)


def load_obj(path) -> ObjectMesh:
    """Minimal OBJ reader: v and (triangulated) f records only."""
    verts, faces = [], []
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not verts:
        raise EmptyGeometry(f"no vertices in {path}")
    return ObjectMesh(np.array(verts, dtype=np.float64),
                      np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_obj(mesh: ObjectMesh, path) -> None:
    with open(path, "w") as f:
        for v in mesh.vertices:
            f.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for t in mesh.triangles:
            f.write(f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}\n")


# -- primitive meshes -------------------------------------------------------

_ICO_T = (1.0 + np.sqrt(5.0)) / 2.0
_ICO_VERTS = np.array([
    [-1, _ICO_T, 0], [1, _ICO_T, 0], [-1, -_ICO_T, 0], [1, -_ICO_T, 0],
    [0, -1, _ICO_T], [0, 1, _ICO_T], [0, -1, -_ICO_T], [0, 1, -_ICO_T],
    [_ICO_T, 0, -1], [_ICO_T, 0, 1], [-_ICO_T, 0, -1], [-_ICO_T, 0, 1],
], dtype=np.float64)
_ICO_FACES = np.array([
    [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
    [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
    [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
    [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
], dtype=np.int64)


def make_icosphere(radius: float, subdivisions: int = 3,
                   center=(0.0, 0.0, 0.0)) -> ObjectMesh:
    verts = _ICO_VERTS / np.linalg.norm(_ICO_VERTS[0])
    faces = _ICO_FACES
    for _ in range(subdivisions):
        midpoint_cache: dict[tuple[int, int], int] = {}
        verts_list = list(verts)

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in midpoint_cache:
                m = (verts_list[a] + verts_list[b]) / 2
                m /= np.linalg.norm(m)
                verts_list.append(m)
                midpoint_cache[key] = len(verts_list) - 1
            return midpoint_cache[key]

        new_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new_faces += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        verts = np.array(verts_list)
        faces = np.array(new_faces, dtype=np.int64)
    return ObjectMesh(verts * radius + np.asarray(center, dtype=np.float64), faces)


def _weld(verts: np.ndarray, faces: np.ndarray, decimals: int = 9):
    rounded = np.round(verts, decimals)
    uniq, inverse = np.unique(rounded, axis=0, return_inverse=True)
    return uniq, inverse[faces]


def make_box(half_extents, spacing: float = 0.012) -> ObjectMesh:
    """Axis-aligned box, faces grid-subdivided to roughly `spacing` meters."""
    hx, hy, hz = [float(h) for h in half_extents]
    verts, faces = [], []

    def face(origin, eu, ev):
        eu, ev = np.asarray(eu, float), np.asarray(ev, float)
        nu = max(2, int(np.ceil(np.linalg.norm(eu) / spacing)) + 1)
        nv = max(2, int(np.ceil(np.linalg.norm(ev) / spacing)) + 1)
        base = len(verts)
        for i in range(nu):
            for j in range(nv):
                verts.append(np.asarray(origin, float) + eu * i / (nu - 1) + ev * j / (nv - 1))
        for i in range(nu - 1):
            for j in range(nv - 1):
                a = base + i * nv + j
                b, c, d = a + nv, a + nv + 1, a + 1
                faces.append([a, b, c])
                faces.append([a, c, d])

    # (eu x ev) must point outward on every face for winding-number signing
    face((-hx, -hy, -hz), (0, 2 * hy, 0), (2 * hx, 0, 0))         # bottom (z-)
    face((-hx, -hy, hz), (2 * hx, 0, 0), (0, 2 * hy, 0))          # top (z+)
    face((-hx, -hy, -hz), (2 * hx, 0, 0), (0, 0, 2 * hz))         # y-
    face((-hx, hy, -hz), (0, 0, 2 * hz), (2 * hx, 0, 0))          # y+
    face((-hx, -hy, -hz), (0, 0, 2 * hz), (0, 2 * hy, 0))         # x-
    face((hx, -hy, -hz), (0, 2 * hy, 0), (0, 0, 2 * hz))          # x+
    v, f = _weld(np.array(verts), np.array(faces, dtype=np.int64))
    return ObjectMesh(v, f)


def make_cylinder(radius: float, half_height: float, spacing: float = 0.01) -> ObjectMesh:
    """Closed cylinder along z with ~`spacing` vertex pitch."""
    nseg = max(8, int(np.ceil(2 * np.pi * radius / spacing)))
    nz = max(2, int(np.ceil(2 * half_height / spacing)) + 1)
    ang = np.linspace(0, 2 * np.pi, nseg, endpoint=False)
    verts = []
    for z in np.linspace(-half_height, half_height, nz):
        for a in ang:
            verts.append([radius * np.cos(a), radius * np.sin(a), z])
    faces = []
    for i in range(nz - 1):
        for j in range(nseg):
            a = i * nseg + j
            b = i * nseg + (j + 1) % nseg
            c = a + nseg
            d = b + nseg
            faces += [[a, b, d], [a, d, c]]
    bot = len(verts)
    verts.append([0, 0, -half_height])
    top = len(verts)
    verts.append([0, 0, half_height])
    for j in range(nseg):
        faces.append([bot, (j + 1) % nseg, j])
        faces.append([top, (nz - 1) * nseg + j, (nz - 1) * nseg + (j + 1) % nseg])
    return ObjectMesh(np.array(verts, dtype=np.float64), np.array(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# Rigid motion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ObjectMotionFrame:
    """One frame of rigid object motion.

    Serialized as 12 numbers: centroid (3), rotation 6D (6), translation (3).
    The centroid is redundant (centroid = R @ rest_centroid + t) and kept as
    a consistency check plus a direct input to the condition features.
    """

    centroid: np.ndarray     # (3,)
    rot6d: np.ndarray        # (6,)
    translation: np.ndarray  # (3,)

    @property
    def rotation(self) -> np.ndarray:
        """Column-convention rotation: world = rotation @ local + translation."""
        return rot6d_to_matrix(self.rot6d)

    @property
    def row_matrix(self) -> np.ndarray:
        """Row-acting matrix W_R: world_rows = local_rows @ W_R + translation."""
        return self.rotation.T

    def vector(self) -> np.ndarray:
        return np.concatenate([self.centroid, self.rot6d, self.translation])

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Pose rest-frame points into the world at this frame."""
        return np.asarray(points) @ self.row_matrix + self.translation

    def unapply(self, points: np.ndarray) -> np.ndarray:
        """World points back into the object's rest frame."""
        return (np.asarray(points) - self.translation) @ self.row_matrix.T

    @staticmethod
    def from_rotation(rotation: np.ndarray, translation, rest_centroid) -> "ObjectMotionFrame":
        translation = np.asarray(translation, dtype=np.float64)
        centroid = rotation @ np.asarray(rest_centroid, dtype=np.float64) + translation
        return ObjectMotionFrame(centroid=centroid,
                                 rot6d=matrix_to_rot6d(rotation),
                                 translation=translation)

    @staticmethod
    def identity(rest_centroid=(0.0, 0.0, 0.0)) -> "ObjectMotionFrame":
        return ObjectMotionFrame.from_rotation(np.eye(3), np.zeros(3), rest_centroid)


def transform_to_frame(points: np.ndarray, frame_i: ObjectMotionFrame,
                       frame_k: ObjectMotionFrame) -> np.ndarray:
    """Carry world points attached to the object at frame i to frame k.

    Row-vector form: p_k = (p_i - T_i) W_R_i^T W_R_k + T_k.
    """
    points = np.asarray(points, dtype=np.float64)
    q = (points - frame_i.translation) @ frame_i.row_matrix.T
    return q @ frame_k.row_matrix + frame_k.translation


@dataclass
class ObjectTrack:
    """Per-frame rigid motion of one object, plus its geometry handle."""

    frames: list[ObjectMotionFrame]
    fps: float
    object_spec: dict | None = None  # primitive / mesh reference, see fields module

    def __len__(self):
        return len(self.frames)

    def motion_matrix(self) -> np.ndarray:
        """(T, 12) array of per-frame motion vectors."""
        return np.stack([f.vector() for f in self.frames])

    def translated(self, offset) -> "ObjectTrack":
        """Rigid world translation of the whole track (used by alignment)."""
        offset = np.asarray(offset, dtype=np.float64)
        frames = [ObjectMotionFrame(centroid=f.centroid + offset, rot6d=f.rot6d.copy(),
                                    translation=f.translation + offset)
                  for f in self.frames]
        return ObjectTrack(frames=frames, fps=self.fps, object_spec=self.object_spec)

    def to_dict(self) -> dict:
        return {
            "fps": self.fps,
            "frames": [
                {"centroid": [float(x) for x in f.centroid],
                 "rot6d": [float(x) for x in f.rot6d],
                 "translation": [float(x) for x in f.translation]}
                for f in self.frames
            ],
            **({"object": self.object_spec} if self.object_spec is not None else {}),
        }

    @staticmethod
    def from_dict(data: dict) -> "ObjectTrack":
        frames = [
            ObjectMotionFrame(centroid=np.array(fr["centroid"], dtype=np.float64),
                              rot6d=np.array(fr["rot6d"], dtype=np.float64),
                              translation=np.array(fr["translation"], dtype=np.float64))
            for fr in data["frames"]
        ]
        return ObjectTrack(frames=frames, fps=data["fps"], object_spec=data.get("object"))

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @staticmethod
    def load(path) -> "ObjectTrack":
        with open(path) as f:
            return ObjectTrack.from_dict(json.load(f))

    def check_centroids(self, rest_centroid, atol: float = 1e-6) -> bool:
        """centroid == R @ rest_centroid + t at every frame."""
        for f in self.frames:
            if np.linalg.norm(f.apply(rest_centroid) - f.centroid) > atol:
                return False
        return True


# ---------------------------------------------------------------------------
# Basis point set encoding
# ---------------------------------------------------------------------------

def sample_basis_points(center=(0.0, 0.0, 0.0), radius: float = BPS_RADIUS,
                        count: int = BPS_COUNT, seed: int = BPS_SEED) -> np.ndarray:
    """Fixed basis points: uniform in a ball around the object rest centroid."""
    rng = np.random.default_rng(seed)
    d = rng.normal(size=(count, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = radius * np.cbrt(rng.uniform(size=(count, 1)))
    return np.asarray(center, dtype=np.float64) + d * r


def nearest_vertex_indices(mesh: ObjectMesh, frame: ObjectMotionFrame,
                           basis: np.ndarray) -> np.ndarray:
    """Index of the nearest world-posed mesh vertex for each basis point.

    Queries are pulled into the object's rest frame so one static KD-tree per
    mesh serves every frame.
    """
    if len(mesh.vertices) == 0:
        raise EmptyGeometry("empty mesh")
    tree = _mesh_tree(mesh)
    local = frame.unapply(basis)
    _, idx = tree.query(local)
    return idx


_TREE_CACHE: dict[int, cKDTree] = {}


def _mesh_tree(mesh: ObjectMesh) -> cKDTree:
    key = id(mesh)
    if key not in _TREE_CACHE:
        if len(_TREE_CACHE) > 64:
            _TREE_CACHE.clear()
        _TREE_CACHE[key] = cKDTree(mesh.vertices)
    return _TREE_CACHE[key]


def compute_bps(mesh: ObjectMesh, frame: ObjectMotionFrame,
                basis: np.ndarray) -> np.ndarray:
    """Delta from each basis point to its nearest world-posed mesh vertex.

    Returns (len(basis), 3); the per-frame shape feature V_t.
    """
    idx = nearest_vertex_indices(mesh, frame, basis)
    world = frame.apply(mesh.vertices[idx])
    return world - basis
