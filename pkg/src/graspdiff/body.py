"""Simplified parametric whole-body model.

A fixed 52-joint skeleton (22 body joints + 15 per hand) with per-joint 6D
rotations, a scalar bone-length multiplier per identity, and a coarse surface
of points rigidly bound to single joints. Stands in for a full statistical
body model while exposing everything the losses, guidance and metrics need:
joints, wrists, hand surface points, feet and whole-body vertices.

Conventions: z is up, x is the facing direction, y points to the subject's
left. The floor is the plane z = 0. Pose vectors are laid out as
``[root translation (3) | root orientation 6D (6) | 51 joint rotations 6D]``
for a total of 315 numbers per frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .errors import DegenerateRotation, ShapeError

NUM_BODY_JOINTS = 22
NUM_HAND_JOINTS = 15
NUM_JOINTS = NUM_BODY_JOINTS + 2 * NUM_HAND_JOINTS  # 52
POSE_DIM = 3 + NUM_JOINTS * 6  # 315

GENDERS = ("neutral", "female", "male")


# ---------------------------------------------------------------------------
# 6D continuous rotations
# ---------------------------------------------------------------------------

def rot6d_to_matrix(r: np.ndarray, eps: float = 1e-8) -> np.ndarray:
    """Map 6D rotation parameters to rotation matrices via Gram-Schmidt.

    The six numbers are read as two 3-vectors (a1, a2); the result has
    columns b1 = a1/|a1|, b2 = normalized (a2 - (b1.a2) b1), b3 = b1 x b2.

    Args:
        r: (..., 6) array.

    Returns:
        (..., 3, 3) rotation matrices with determinant +1.

    Raises:
        DegenerateRotation: if a1 is near zero or a2 is near parallel to a1.
    """
    r = np.asarray(r, dtype=np.float64)
    if r.shape[-1] != 6:
        raise ShapeError(f"expected trailing dimension 6, got {r.shape}")
    if not np.all(np.isfinite(r)):
        raise DegenerateRotation("non-finite 6D rotation input")
    a1 = r[..., 0:3]
    a2 = r[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < eps):
        raise DegenerateRotation("first 6D column has near-zero norm")
    b1 = a1 / n1
    d = np.sum(b1 * a2, axis=-1, keepdims=True)
    u2 = a2 - d * b1
    n2 = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(n2 < eps):
        raise DegenerateRotation("6D columns are near parallel")
    b2 = u2 / n2
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def matrix_to_rot6d(mat: np.ndarray) -> np.ndarray:
    """First two columns of a rotation matrix, flattened to (..., 6)."""
    mat = np.asarray(mat, dtype=np.float64)
    return np.concatenate([mat[..., :, 0], mat[..., :, 1]], axis=-1)


def rot6d_to_matrix_with_cache(r: np.ndarray, eps: float = 1e-8):
    """Like rot6d_to_matrix but returns intermediates needed for backward."""
    r = np.asarray(r, dtype=np.float64)
    a1 = r[..., 0:3]
    a2 = r[..., 3:6]
    n1 = np.linalg.norm(a1, axis=-1, keepdims=True)
    if np.any(n1 < eps):
        raise DegenerateRotation("first 6D column has near-zero norm")
    b1 = a1 / n1
    d = np.sum(b1 * a2, axis=-1, keepdims=True)
    u2 = a2 - d * b1
    n2 = np.linalg.norm(u2, axis=-1, keepdims=True)
    if np.any(n2 < eps):
        raise DegenerateRotation("6D columns are near parallel")
    b2 = u2 / n2
    b3 = np.cross(b1, b2)
    mat = np.stack([b1, b2, b3], axis=-1)
    cache = (a2, n1, b1, d, n2, b2)
    return mat, cache


def rot6d_to_matrix_backward(d_mat: np.ndarray, cache) -> np.ndarray:
    """Reverse-mode derivative of rot6d_to_matrix.

    Args:
        d_mat: (..., 3, 3) gradient w.r.t. the output matrix.
        cache: intermediates from rot6d_to_matrix_with_cache.

    Returns:
        (..., 6) gradient w.r.t. the 6D input.
    """
    a2, n1, b1, d, n2, b2 = cache
    g1 = d_mat[..., :, 0]
    g2 = d_mat[..., :, 1]
    g3 = d_mat[..., :, 2]

    # b3 = b1 x b2
    db1 = g1 + np.cross(b2, g3)
    db2 = g2 + np.cross(g3, b1)

    # b2 = u2 / n2
    du2 = (db2 - np.sum(db2 * b2, axis=-1, keepdims=True) * b2) / n2

    # u2 = a2 - (b1.a2) b1
    da2 = du2 - np.sum(du2 * b1, axis=-1, keepdims=True) * b1
    db1 = db1 - d * du2 - np.sum(du2 * b1, axis=-1, keepdims=True) * a2

    # b1 = a1 / n1
    da1 = (db1 - np.sum(db1 * b1, axis=-1, keepdims=True) * b1) / n1
    return np.concatenate([da1, da2], axis=-1)


# ---------------------------------------------------------------------------
# Skeleton / identity / pose containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Skeleton:
    """Fixed skeleton topology plus a rigidly bound surface point template.

    offsets are rest translations from the parent joint in meters; the root's
    offset is zero and its parent index is -1. ``rest_root_height`` is the
    root z that puts both feet on the floor in the zero pose.
    """

    joint_names: tuple[str, ...]
    parents: np.ndarray            # (K,) int, -1 for root
    offsets: np.ndarray            # (K, 3) float64
    vertex_joints: np.ndarray      # (V,) int, binding joint per surface point
    vertex_offsets: np.ndarray     # (V, 3) float64, joint-local offsets
    feet_joints: tuple[int, ...]
    left_wrist: int
    right_wrist: int
    left_hand_joints: tuple[int, ...]   # wrist + fingers
    right_hand_joints: tuple[int, ...]
    left_fingertip_vertices: tuple[int, ...]
    right_fingertip_vertices: tuple[int, ...]
    left_palm_vertices: tuple[int, ...]
    right_palm_vertices: tuple[int, ...]
    left_hand_vertices: tuple[int, ...] = field(default=())
    right_hand_vertices: tuple[int, ...] = field(default=())
    rest_root_height: float = 0.0

    def __post_init__(self):
        parents = np.asarray(self.parents)
        if parents[0] != -1:
            raise ValueError("joint 0 must be the root (parent -1)")
        if np.any(parents[1:] >= np.arange(1, len(parents))):
            raise ValueError("parents must precede children (topological order)")
        if np.any(self.vertex_joints < 0) or np.any(self.vertex_joints >= len(parents)):
            raise ValueError("vertex binding out of range")

    @property
    def num_joints(self) -> int:
        return len(self.joint_names)

    @property
    def num_vertices(self) -> int:
        return len(self.vertex_joints)

    @property
    def pose_dim(self) -> int:
        return 3 + self.num_joints * 6

    def joint_index(self, name: str) -> int:
        return self.joint_names.index(name)

    def pose_slice(self, joint: int) -> slice:
        """Slice of the pose vector holding this joint's 6D rotation.

        Joint 0's rotation is the root orientation at pose[3:9].
        """
        return slice(3 + joint * 6, 3 + (joint + 1) * 6)


@dataclass(frozen=True)
class Identity:
    """Bone-length multiplier plus gender tag (one-hot in the feature vector)."""

    scale: float = 1.0
    gender: str = "neutral"

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        if self.gender not in GENDERS:
            raise ValueError(f"gender must be one of {GENDERS}")

    def feature(self) -> np.ndarray:
        """[scale, one-hot(neutral, female, male)] as a 4-vector."""
        onehot = np.zeros(3)
        onehot[GENDERS.index(self.gender)] = 1.0
        return np.concatenate([[self.scale], onehot])


def zero_pose(skeleton: Skeleton, root_translation=None) -> np.ndarray:
    """Pose vector with identity rotations everywhere.

    Default root translation is the rest root height, which puts the feet on
    the floor.
    """
    pose = np.zeros(skeleton.pose_dim)
    ident = np.array([1.0, 0, 0, 0, 1.0, 0])
    for j in range(skeleton.num_joints):
        pose[skeleton.pose_slice(j)] = ident
    if root_translation is None:
        root_translation = (0.0, 0.0, skeleton.rest_root_height)
    pose[0:3] = root_translation
    return pose


# ---------------------------------------------------------------------------
# Forward kinematics
# ---------------------------------------------------------------------------

def forward_kinematics(skeleton: Skeleton, identity: Identity, pose: np.ndarray,
                       return_cache: bool = False):
    """Global joint positions and rotations for a batch of poses.

    Args:
        skeleton: skeleton definition.
        identity: bone scaling.
        pose: (..., pose_dim) array.
        return_cache: also return intermediates for the backward pass.

    Returns:
        positions (..., K, 3), rotations (..., K, 3, 3)[, cache].
    """
    pose = np.asarray(pose, dtype=np.float64)
    K = skeleton.num_joints
    if pose.shape[-1] != skeleton.pose_dim:
        raise ShapeError(f"pose dim {pose.shape[-1]} != {skeleton.pose_dim}")
    batch = pose.shape[:-1]

    rot6d = pose[..., 3:].reshape(batch + (K, 6))
    local_rot, r6_cache = rot6d_to_matrix_with_cache(rot6d)

    scaled = skeleton.offsets * identity.scale  # (K, 3)
    positions = np.empty(batch + (K, 3))
    rotations = np.empty(batch + (K, 3, 3))
    positions[..., 0, :] = pose[..., 0:3]
    rotations[..., 0, :, :] = local_rot[..., 0, :, :]
    for j in range(1, K):
        p = skeleton.parents[j]
        rp = rotations[..., p, :, :]
        rotations[..., j, :, :] = rp @ local_rot[..., j, :, :]
        positions[..., j, :] = positions[..., p, :] + np.einsum(
            "...ij,j->...i", rp, scaled[j])

    if return_cache:
        cache = {
            "local_rot": local_rot,
            "r6_cache": r6_cache,
            "rotations": rotations,
            "scaled_offsets": scaled,
            "skeleton": skeleton,
        }
        return positions, rotations, cache
    return positions, rotations


def forward_kinematics_backward(d_positions, d_rotations, cache) -> np.ndarray:
    """Reverse-mode derivative of forward_kinematics w.r.t. the pose vector.

    Args:
        d_positions: (..., K, 3) gradient w.r.t. joint positions (or None).
        d_rotations: (..., K, 3, 3) gradient w.r.t. global rotations (or None).
        cache: from forward_kinematics(..., return_cache=True).

    Returns:
        (..., pose_dim) gradient w.r.t. the pose array.
    """
    skeleton: Skeleton = cache["skeleton"]
    local_rot = cache["local_rot"]
    rotations = cache["rotations"]
    scaled = cache["scaled_offsets"]
    K = skeleton.num_joints
    batch = rotations.shape[:-3]

    dp = np.zeros(batch + (K, 3)) if d_positions is None else d_positions.astype(np.float64).copy()
    dr = np.zeros(batch + (K, 3, 3)) if d_rotations is None else d_rotations.astype(np.float64).copy()
    d_local = np.zeros_like(local_rot)

    for j in range(K - 1, 0, -1):
        p = skeleton.parents[j]
        rp = rotations[..., p, :, :]
        # positions[j] = positions[p] + rp @ off_j
        dp[..., p, :] += dp[..., j, :]
        dr[..., p, :, :] += dp[..., j, :, None] * scaled[j][None, :]
        # rotations[j] = rp @ local_rot[j]
        dr[..., p, :, :] += dr[..., j, :, :] @ np.swapaxes(local_rot[..., j, :, :], -1, -2)
        d_local[..., j, :, :] = np.swapaxes(rp, -1, -2) @ dr[..., j, :, :]
    d_local[..., 0, :, :] = dr[..., 0, :, :]

    d_rot6d = rot6d_to_matrix_backward(d_local, cache["r6_cache"])
    d_pose = np.zeros(batch + (skeleton.pose_dim,))
    d_pose[..., 0:3] = dp[..., 0, :]
    d_pose[..., 3:] = d_rot6d.reshape(batch + (K * 6,))
    return d_pose


def skin_vertices(skeleton: Skeleton, positions: np.ndarray,
                  rotations: np.ndarray) -> np.ndarray:
    """Surface points from joint transforms: v = R[j(v)] @ offset_v + p[j(v)].

    Vertex offsets are defined for scale 1; they are not rescaled by identity,
    which keeps the surface thickness constant across identities.
    """
    bj = skeleton.vertex_joints
    off = skeleton.vertex_offsets  # (V, 3)
    rot = rotations[..., bj, :, :]  # (..., V, 3, 3)
    pos = positions[..., bj, :]
    return np.einsum("...vij,vj->...vi", rot, off) + pos


def skin_vertices_backward(skeleton: Skeleton, d_vertices):
    """Gradients of skin_vertices w.r.t. joint positions and rotations."""
    bj = skeleton.vertex_joints
    off = skeleton.vertex_offsets
    K = skeleton.num_joints
    batch = d_vertices.shape[:-2]
    dp = np.zeros(batch + (K, 3))
    dr = np.zeros(batch + (K, 3, 3))
    np.add.at(dp, (..., bj, slice(None)), d_vertices)
    douter = d_vertices[..., :, None] * off[:, None, :]  # (..., V, 3, 3)
    np.add.at(dr, (..., bj, slice(None), slice(None)), douter)
    return dp, dr


# ---------------------------------------------------------------------------
# Skeleton serialization
# ---------------------------------------------------------------------------

def skeleton_to_dict(skeleton: Skeleton) -> dict:
    return {
        "joints": [
            {"name": n, "parent": int(p), "offset": list(map(float, o))}
            for n, p, o in zip(skeleton.joint_names, skeleton.parents, skeleton.offsets)
        ],
        "vertices": [
            {"joint": int(j), "offset": list(map(float, o))}
            for j, o in zip(skeleton.vertex_joints, skeleton.vertex_offsets)
        ],
        "feet_joints": list(skeleton.feet_joints),
        "left_wrist": skeleton.left_wrist,
        "right_wrist": skeleton.right_wrist,
        "left_hand_joints": list(skeleton.left_hand_joints),
        "right_hand_joints": list(skeleton.right_hand_joints),
        "left_fingertip_vertices": list(skeleton.left_fingertip_vertices),
        "right_fingertip_vertices": list(skeleton.right_fingertip_vertices),
        "left_palm_vertices": list(skeleton.left_palm_vertices),
        "right_palm_vertices": list(skeleton.right_palm_vertices),
        "left_hand_vertices": list(skeleton.left_hand_vertices),
        "right_hand_vertices": list(skeleton.right_hand_vertices),
        "rest_root_height": skeleton.rest_root_height,
    }


def skeleton_from_dict(data: dict) -> Skeleton:
    joints = data["joints"]
    verts = data["vertices"]
    return Skeleton(
        joint_names=tuple(j["name"] for j in joints),
        parents=np.array([j["parent"] for j in joints], dtype=np.int64),
        offsets=np.array([j["offset"] for j in joints], dtype=np.float64),
        vertex_joints=np.array([v["joint"] for v in verts], dtype=np.int64),
        vertex_offsets=np.array([v["offset"] for v in verts], dtype=np.float64),
        feet_joints=tuple(data["feet_joints"]),
        left_wrist=data["left_wrist"],
        right_wrist=data["right_wrist"],
        left_hand_joints=tuple(data["left_hand_joints"]),
        right_hand_joints=tuple(data["right_hand_joints"]),
        left_fingertip_vertices=tuple(data["left_fingertip_vertices"]),
        right_fingertip_vertices=tuple(data["right_fingertip_vertices"]),
        left_palm_vertices=tuple(data["left_palm_vertices"]),
        right_palm_vertices=tuple(data["right_palm_vertices"]),
        left_hand_vertices=tuple(data.get("left_hand_vertices", ())),
        right_hand_vertices=tuple(data.get("right_hand_vertices", ())),
        rest_root_height=data["rest_root_height"],
    )


def save_skeleton(skeleton: Skeleton, path) -> None:
    with open(path, "w") as f:
        json.dump(skeleton_to_dict(skeleton), f, indent=1)


def load_skeleton(path) -> Skeleton:
    with open(path) as f:
        return skeleton_from_dict(json.load(f))


# ---------------------------------------------------------------------------
# Canonical skeleton
# ---------------------------------------------------------------------------

_FINGERS = ("thumb", "index", "middle", "ring", "pinky")

# Per finger: (proximal offset from wrist, middle offset, distal offset) for
# the left hand; the right hand mirrors y. Units meters at scale 1, hand flat
# with fingers along +y and palm normal -z.
_FINGER_OFFSETS = {
    "thumb": ((0.030, 0.025, -0.010), (0.012, 0.026, -0.004), (0.008, 0.022, 0.0)),
    "index": ((0.025, 0.090, 0.0), (0.0, 0.036, 0.0), (0.0, 0.024, 0.0)),
    "middle": ((0.008, 0.095, 0.0), (0.0, 0.040, 0.0), (0.0, 0.026, 0.0)),
    "ring": ((-0.010, 0.090, 0.0), (0.0, 0.035, 0.0), (0.0, 0.024, 0.0)),
    "pinky": ((-0.028, 0.082, 0.0), (0.0, 0.028, 0.0), (0.0, 0.020, 0.0)),
}

_FINGER_TIP_LEN = {"thumb": 0.020, "index": 0.022, "middle": 0.024,
                   "ring": 0.022, "pinky": 0.018}


def _build_body_joints():
    J = [
        ("pelvis", -1, (0.0, 0.0, 0.0)),
        ("spine1", 0, (0.0, 0.0, 0.10)),
        ("spine2", 1, (0.0, 0.0, 0.12)),
        ("spine3", 2, (0.0, 0.0, 0.13)),
        ("neck", 3, (0.0, 0.0, 0.10)),
        ("head", 4, (0.0, 0.0, 0.08)),
        ("left_hip", 0, (0.0, 0.09, -0.05)),
        ("left_knee", 6, (0.0, 0.0, -0.40)),
        ("left_ankle", 7, (0.0, 0.0, -0.43)),
        ("left_toe", 8, (0.14, 0.0, -0.05)),
        ("right_hip", 0, (0.0, -0.09, -0.05)),
        ("right_knee", 10, (0.0, 0.0, -0.40)),
        ("right_ankle", 11, (0.0, 0.0, -0.43)),
        ("right_toe", 12, (0.14, 0.0, -0.05)),
        ("left_clavicle", 3, (0.0, 0.05, 0.07)),
        ("left_shoulder", 14, (0.0, 0.13, 0.0)),
        ("left_elbow", 15, (0.0, 0.26, 0.0)),
        ("left_wrist", 16, (0.0, 0.25, 0.0)),
        ("right_clavicle", 3, (0.0, -0.05, 0.07)),
        ("right_shoulder", 18, (0.0, -0.13, 0.0)),
        ("right_elbow", 19, (0.0, -0.26, 0.0)),
        ("right_wrist", 20, (0.0, -0.25, 0.0)),
    ]
    assert len(J) == NUM_BODY_JOINTS
    return J


def _mirror(o, side):
    return (o[0], o[1] if side == "left" else -o[1], o[2])


def build_canonical_skeleton() -> Skeleton:
    """Construct the canonical 52-joint skeleton with ~400 surface points."""
    joints = _build_body_joints()
    hand_joint_idx = {}
    for side, wrist_name in (("left", "left_wrist"), ("right", "right_wrist")):
        wrist = next(i for i, (n, _, _) in enumerate(joints) if n == wrist_name)
        for fi, fname in enumerate(_FINGERS):
            offs = _FINGER_OFFSETS[fname]
            parent = wrist
            for seg in range(3):
                name = f"{side}_{fname}{seg + 1}"
                joints.append((name, parent, _mirror(offs[seg], side)))
                parent = len(joints) - 1
                hand_joint_idx[name] = parent
    assert len(joints) == NUM_JOINTS

    names = tuple(j[0] for j in joints)
    parents = np.array([j[1] for j in joints], dtype=np.int64)
    offsets = np.array([j[2] for j in joints], dtype=np.float64)

    name_to_idx = {n: i for i, n in enumerate(names)}

    vertex_joints: list[int] = []
    vertex_offsets: list[tuple[float, float, float]] = []

    def add(joint, off):
        vertex_joints.append(joint)
        vertex_offsets.append(tuple(float(x) for x in off))
        return len(vertex_joints) - 1

    def ring(joint, center, radius, n, axes=((1, 0, 0), (0, 0, 1))):
        a, b = np.array(axes[0], float), np.array(axes[1], float)
        for t in np.linspace(0, 2 * np.pi, n, endpoint=False):
            add(joint, np.array(center) + radius * (np.cos(t) * a + np.sin(t) * b))

    # Torso / head: rings in the horizontal plane around the spine chain.
    for jn, r, n in (("pelvis", 0.13, 10), ("spine1", 0.13, 8), ("spine2", 0.13, 8),
                     ("spine3", 0.12, 8), ("neck", 0.05, 6), ("head", 0.09, 10)):
        ring(name_to_idx[jn], (0, 0, 0.05), r, n, axes=((1, 0, 0), (0, 1, 0)))

    # Limb segments: two rings per bone, perpendicular to the bone direction.
    for side in ("left", "right"):
        sy = 1.0 if side == "left" else -1.0
        for jn, bone, r, n in (
                (f"{side}_hip", (0, 0, -0.40), 0.07, 6),
                (f"{side}_knee", (0, 0, -0.43), 0.055, 6),
                (f"{side}_shoulder", (0, sy * 0.26, 0), 0.045, 6),
                (f"{side}_elbow", (0, sy * 0.25, 0), 0.04, 6)):
            j = name_to_idx[jn]
            axes = ((1, 0, 0), (0, 1, 0)) if "hip" in jn or "knee" in jn else ((1, 0, 0), (0, 0, 1))
            bone = np.array(bone)
            ring(j, bone * 0.35, r, n, axes=axes)
            ring(j, bone * 0.75, r * 0.9, n, axes=axes)
        # Foot sole: points on the floor plane under ankle and toe.
        ankle = name_to_idx[f"{side}_ankle"]
        toe = name_to_idx[f"{side}_toe"]
        for dx, dy in ((0.0, 0.03), (0.0, -0.03), (0.07, 0.03), (0.07, -0.03), (-0.04, 0.0)):
            add(ankle, (dx, dy, -0.05))
        for dx, dy in ((0.03, 0.02), (0.03, -0.02), (-0.03, 0.02), (-0.03, -0.02)):
            add(toe, (dx, dy, 0.0))

    # Hands: dense coverage. Per finger segment a 4-point ring plus the
    # midpoint; one tip point past each distal segment; a palm grid on the
    # wrist. >= 80 points per hand.
    fingertip = {"left": [], "right": []}
    palm = {"left": [], "right": []}
    hand_verts = {"left": [], "right": []}
    finger_r = 0.008
    for side in ("left", "right"):
        sy = 1.0 if side == "left" else -1.0
        for fname in _FINGERS:
            for seg in range(3):
                j = hand_joint_idx[f"{side}_{fname}{seg + 1}"]
                if seg < 2:
                    nxt = _mirror(_FINGER_OFFSETS[fname][seg + 1], side)
                else:
                    nxt = (0.0, sy * _FINGER_TIP_LEN[fname], 0.0)
                mid = 0.5 * np.array(nxt)
                hand_verts[side].append(add(j, mid))
                for t in (0, 1, 2, 3):
                    ang = t * np.pi / 2
                    off = mid + finger_r * np.array([np.cos(ang), 0, np.sin(ang)])
                    hand_verts[side].append(add(j, off))
                if seg == 2:
                    tip = add(j, nxt)
                    fingertip[side].append(tip)
                    hand_verts[side].append(tip)
        wrist = name_to_idx[f"{side}_wrist"]
        for gx in (-0.02, 0.0, 0.02):
            for gy in (0.02, 0.04, 0.06, 0.08):
                v = add(wrist, (gx, sy * gy, -0.008))
                palm[side].append(v)
                hand_verts[side].append(v)
        # Back of the hand.
        for gx in (-0.015, 0.015):
            for gy in (0.03, 0.06):
                hand_verts[side].append(add(wrist, (gx, sy * gy, 0.012)))

    left_hand_joints = (name_to_idx["left_wrist"],) + tuple(
        hand_joint_idx[f"left_{f}{s + 1}"] for f in _FINGERS for s in range(3))
    right_hand_joints = (name_to_idx["right_wrist"],) + tuple(
        hand_joint_idx[f"right_{f}{s + 1}"] for f in _FINGERS for s in range(3))

    rest_root_height = 0.05 + 0.40 + 0.43 + 0.05  # hip drop + thigh + shin + ankle

    return Skeleton(
        joint_names=names,
        parents=parents,
        offsets=offsets,
        vertex_joints=np.array(vertex_joints, dtype=np.int64),
        vertex_offsets=np.array(vertex_offsets, dtype=np.float64),
        feet_joints=(name_to_idx["left_ankle"], name_to_idx["left_toe"],
                     name_to_idx["right_ankle"], name_to_idx["right_toe"]),
        left_wrist=name_to_idx["left_wrist"],
        right_wrist=name_to_idx["right_wrist"],
        left_hand_joints=left_hand_joints,
        right_hand_joints=right_hand_joints,
        left_fingertip_vertices=tuple(fingertip["left"]),
        right_fingertip_vertices=tuple(fingertip["right"]),
        left_palm_vertices=tuple(palm["left"]),
        right_palm_vertices=tuple(palm["right"]),
        left_hand_vertices=tuple(hand_verts["left"]),
        right_hand_vertices=tuple(hand_verts["right"]),
        rest_root_height=rest_root_height,
    )


_CANONICAL = None


def canonical_skeleton() -> Skeleton:
    """The skeleton shipped with the package (assets/canonical_skeleton.json)."""
    global _CANONICAL
    if _CANONICAL is None:
        ref = resources.files("graspdiff").joinpath("assets/canonical_skeleton.json")
        with ref.open() as f:
            _CANONICAL = skeleton_from_dict(json.load(f))
    return _CANONICAL
