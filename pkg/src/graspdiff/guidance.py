"""Inference-time reconstruction guidance.

Three goal terms act on the predicted clean sample (de-normalized, meters):

* grasp stabilization: within each contact segment the wrist is pinned to the
  pose it had at the segment start, carried along by the object's rigid
  motion; upper-body pose parameters descend toward it.
* hand-object contact: penetration plus tau-masked contact distance of fixed
  sample points on the hands against the object's signed distance field;
  only hand pose parameters of contacting hands move.
* feet-floor contact: total depth of body surface points below z = 0.

Gradients through FK/skinning/SDF are central finite differences over the
optimized parameter subset, batched over perturbations and frames (goals are
per-frame separable, so one batched evaluation yields every frame's partial).
Each update is x <- x - rate * posterior_variance(n) * grad.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .body import Identity, Skeleton, forward_kinematics
from .contact import contact_labels_from_kappa, contact_segments
from .errors import GuidanceDiverged
from .geometry import ObjectTrack, transform_to_frame
from .sdf import SignedField

log = logging.getLogger("graspdiff")

POSE_DIM = 315
SAMPLE_DIM = 321
_FD_H = 1e-4
_CHUNK = 4000  # max FK instances per batched evaluation


@dataclass
class GuidanceConfig:
    guide_gs: bool = True
    guide_ho: bool = True
    guide_feet: bool = True
    gs_rate: float = 1e-4
    gs_iterations: int = 300
    ho_rate: float = 1e-4
    ho_iterations: int = 100
    feet_rate: float = 1e-3
    feet_iterations: int = 50
    lambda_ho: float = 0.5
    hand_samples: int = 64
    kappa_threshold: float = 0.12
    goal_tolerance: float = 1e-6  # stop a term once its goal is this small

    def __post_init__(self):
        if not (0.0 <= self.lambda_ho <= 1.0):
            raise ValueError("lambda_ho must be in [0, 1]")
        for r in (self.gs_rate, self.ho_rate, self.feet_rate):
            if r <= 0:
                raise ValueError("guidance rates must be positive")
        for i in (self.gs_iterations, self.ho_iterations, self.feet_iterations):
            if i < 1:
                raise ValueError("iteration counts must be >= 1")

    @property
    def any_enabled(self) -> bool:
        return self.guide_gs or self.guide_ho or self.guide_feet

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in (
            "guide_gs", "guide_ho", "guide_feet", "gs_rate", "gs_iterations",
            "ho_rate", "ho_iterations", "feet_rate", "feet_iterations",
            "lambda_ho", "hand_samples", "kappa_threshold", "goal_tolerance")}

    @staticmethod
    def from_dict(d: dict) -> "GuidanceConfig":
        return GuidanceConfig(**d)

    def disabled(self) -> "GuidanceConfig":
        return replace(self, guide_gs=False, guide_ho=False, guide_feet=False)


@dataclass(frozen=True)
class ParameterMask:
    """Pose-vector index sets each guidance term may modify."""

    upper_body: np.ndarray
    left_hand: np.ndarray
    right_hand: np.ndarray
    full: np.ndarray

    @property
    def hands(self) -> np.ndarray:
        return np.concatenate([self.left_hand, self.right_hand])


def default_masks(skeleton: Skeleton) -> ParameterMask:
    def pose_indices(joints):
        return np.concatenate([np.arange(skeleton.pose_slice(j).start,
                                         skeleton.pose_slice(j).stop)
                               for j in joints])

    upper_names = ["spine1", "spine2", "spine3",
                   "left_clavicle", "left_shoulder", "left_elbow", "left_wrist",
                   "right_clavicle", "right_shoulder", "right_elbow", "right_wrist"]
    upper = pose_indices([skeleton.joint_index(n) for n in upper_names])
    left = pose_indices(skeleton.left_hand_joints[1:])    # fingers only
    right = pose_indices(skeleton.right_hand_joints[1:])
    return ParameterMask(upper_body=np.sort(upper), left_hand=np.sort(left),
                         right_hand=np.sort(right), full=np.arange(skeleton.pose_dim))


def default_hand_sample_indices(skeleton: Skeleton, count: int = 64):
    """Fixed per-hand surface-point lists with the highest contact rates:
    fingertips first, then finger segment points, then palm."""
    out = []
    for tips, hand, palm in ((skeleton.left_fingertip_vertices,
                              skeleton.left_hand_vertices,
                              skeleton.left_palm_vertices),
                             (skeleton.right_fingertip_vertices,
                              skeleton.right_hand_vertices,
                              skeleton.right_palm_vertices)):
        ordered = list(tips) + [v for v in hand if v not in tips and v not in palm] \
            + list(palm)
        out.append(np.array(ordered[:count], dtype=np.int64))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# Stabilized wrist targets (grasp stabilization)
# ---------------------------------------------------------------------------

def stabilized_wrist(kappa: np.ndarray, tau: np.ndarray,
                     track: ObjectTrack) -> np.ndarray:
    """Corrected wrist world positions (T, 2, 3).

    Inside each contact segment the wrist is frozen at its segment-start pose
    relative to the object and carried by the object's rigid motion; outside
    segments it is the raw centroid + kappa reconstruction.
    """
    kappa = np.asarray(kappa, dtype=np.float64)
    T = kappa.shape[0]
    centroids = np.stack([f.centroid for f in track.frames])
    out = np.stack([kappa[:, 0:3] + centroids, kappa[:, 3:6] + centroids], axis=1)
    for hand in range(2):
        for i, j in contact_segments(np.asarray(tau)[:, hand]):
            anchor = kappa[i, 3 * hand:3 * hand + 3] + centroids[i]
            for k in range(i, j + 1):
                out[k, hand] = transform_to_frame(anchor, track.frames[i],
                                                  track.frames[k])[0]
    return out


# ---------------------------------------------------------------------------
# Goal functions (per-frame separable)
# ---------------------------------------------------------------------------

def goal_gs(wrists: np.ndarray, targets: np.ndarray, tau: np.ndarray) -> float:
    """Sum over frames/hands of tau * |reconstructed wrist - target|."""
    return float(np.sum(goal_gs_per_frame(wrists, targets, tau)))


def goal_gs_per_frame(wrists, targets, tau):
    d = np.linalg.norm(wrists - targets, axis=-1)  # (..., T, 2)
    return np.sum(np.asarray(tau) * d, axis=-1)


def goal_ho(sdf_left: np.ndarray, sdf_right: np.ndarray, tau: np.ndarray,
            lambda_ho: float) -> float:
    """Penetration + tau-masked contact distance from per-point signed distances."""
    return float(np.sum(goal_ho_per_frame(sdf_left, sdf_right, tau, lambda_ho)))


def goal_ho_per_frame(sdf_left, sdf_right, tau, lambda_ho):
    tau = np.asarray(tau, dtype=np.float64)
    pene = -np.minimum(sdf_left, 0.0).sum(axis=-1) - np.minimum(sdf_right, 0.0).sum(axis=-1)
    cont = tau[..., 0] * np.abs(sdf_left).sum(axis=-1) \
        + tau[..., 1] * np.abs(sdf_right).sum(axis=-1)
    return lambda_ho * pene + (1.0 - lambda_ho) * cont


def goal_feet(vertices: np.ndarray) -> float:
    """Total depth below the floor plane z = 0."""
    return float(np.sum(goal_feet_per_frame(vertices)))


def goal_feet_per_frame(vertices):
    z = np.asarray(vertices)[..., 2]
    return np.where(z < 0, -z, 0.0).sum(axis=-1)


# ---------------------------------------------------------------------------
# Analytic gradients (dual route to the finite-difference implementation)
# ---------------------------------------------------------------------------

def goal_gs_pose_gradient(skeleton: Skeleton, identity: Identity, pose: np.ndarray,
                          targets: np.ndarray, tau: np.ndarray) -> np.ndarray:
    """d goal_gs / d pose via reverse mode through FK; pose (T, pose_dim)."""
    from .body import forward_kinematics_backward
    pos, rot, cache = forward_kinematics(skeleton, identity, pose, return_cache=True)
    wrists = pos[:, [skeleton.left_wrist, skeleton.right_wrist]]
    diff = wrists - targets
    norm = np.linalg.norm(diff, axis=-1, keepdims=True)
    g = np.asarray(tau, dtype=np.float64)[..., None] * diff / np.maximum(norm, 1e-12)
    dp = np.zeros_like(pos)
    dp[:, skeleton.left_wrist] = g[:, 0]
    dp[:, skeleton.right_wrist] = g[:, 1]
    return forward_kinematics_backward(dp, None, cache)


def goal_feet_pose_gradient(skeleton: Skeleton, identity: Identity,
                            pose: np.ndarray) -> np.ndarray:
    """d goal_feet / d pose via reverse mode through FK + skinning."""
    from .body import forward_kinematics_backward, skin_vertices, skin_vertices_backward
    pos, rot, cache = forward_kinematics(skeleton, identity, pose, return_cache=True)
    verts = skin_vertices(skeleton, pos, rot)
    dv = np.zeros_like(verts)
    dv[..., 2] = np.where(verts[..., 2] < 0, -1.0, 0.0)
    dp, dr = skin_vertices_backward(skeleton, dv)
    return forward_kinematics_backward(dp, dr, cache)


# ---------------------------------------------------------------------------
# Finite-difference descent
# ---------------------------------------------------------------------------

def _fd_frame_gradient(goal_of_poses, pose: np.ndarray, frames: np.ndarray,
                       param_idx: np.ndarray, h: float = _FD_H) -> np.ndarray:
    """Central differences of a per-frame goal w.r.t. pose parameters.

    goal_of_poses: callable on (B, Tf, pose_dim) -> (B, Tf) per-frame goals,
    evaluated only on the selected frames. Returns (Tf, P).
    """
    P = len(param_idx)
    base = pose[frames]  # (Tf, pose_dim)
    grad = np.empty((len(frames), P))
    per_chunk = max(1, _CHUNK // max(len(frames), 1) // 2)
    for s in range(0, P, per_chunk):
        idx = param_idx[s:s + per_chunk]
        k = len(idx)
        batch = np.repeat(base[None], 2 * k, axis=0)
        for a, i in enumerate(idx):
            batch[2 * a, :, i] += h
            batch[2 * a + 1, :, i] -= h
        g = goal_of_poses(batch)  # (2k, Tf)
        grad[:, s:s + k] = ((g[0::2] - g[1::2]) / (2 * h)).T
    return grad


def _descend(x: np.ndarray, term: str, param_idx: np.ndarray, rate: float,
             iterations: int, variance: float, goal_full, goal_of_poses,
             active_frames_fn, tol: float, log_rows: list | None,
             step: int | None) -> None:
    """Generic per-term loop; mutates the pose block of x in place."""
    for it in range(iterations):
        per_frame = goal_full(x[:, :POSE_DIM])
        total = float(per_frame.sum())
        if not np.isfinite(total):
            raise GuidanceDiverged(term, it, step)
        if log_rows is not None:
            log_rows.append((step, term, it, total))
        if total <= tol:
            break
        frames = active_frames_fn(per_frame)
        if len(frames) == 0:
            break
        grad = _fd_frame_gradient(goal_of_poses(frames), x[:, :POSE_DIM],
                                  frames, param_idx)
        if not np.all(np.isfinite(grad)):
            raise GuidanceDiverged(term, it, step)
        upd = rate * variance * grad
        x[np.ix_(frames, param_idx)] -= upd
        if it > 0 and log_rows is not None and len(log_rows) >= 2:
            prev = log_rows[-2][3]
            if log_rows[-1][1] == term and total > prev + 1e-12:
                log.debug("guidance %s goal increased at iter %d: %g -> %g",
                          term, it, prev, total)


def apply_guidance(x0: np.ndarray, n: int, tau: np.ndarray, track: ObjectTrack,
                   skeleton: Skeleton, identity: Identity, rest_field: SignedField,
                   schedule, config: GuidanceConfig,
                   masks: ParameterMask | None = None,
                   log_rows: list | None = None) -> np.ndarray:
    """Run the enabled guidance terms (feet, grasp stabilization, hand-object)
    on a de-normalized sample x0 (T, 321). Returns the adjusted sample; the
    input array is returned unchanged (same object) when nothing is enabled.
    """
    if not config.any_enabled:
        return x0
    masks = masks or default_masks(skeleton)
    variance = float(schedule.posterior_variance(n))
    x = np.array(x0, dtype=np.float64)
    T = x.shape[0]
    tau = np.asarray(tau)

    rot_cols = np.stack([f.rotation for f in track.frames])       # (T, 3, 3)
    trans = np.stack([f.translation for f in track.frames])

    def fk_pose_batch(poses):
        pos, rot = forward_kinematics(skeleton, identity, poses)
        return pos, rot

    # ---- feet ----
    if config.guide_feet:
        from .body import skin_vertices

        def feet_goal_full(pose):
            pos, rot = fk_pose_batch(pose)
            return goal_feet_per_frame(skin_vertices(skeleton, pos, rot))

        def feet_goal_of_poses(frames):
            def fn(batch):
                pos, rot = fk_pose_batch(batch)
                return goal_feet_per_frame(skin_vertices(skeleton, pos, rot))
            return fn

        _descend(x, "feet", masks.full, config.feet_rate, config.feet_iterations,
                 variance, feet_goal_full, feet_goal_of_poses,
                 lambda pf: np.nonzero(pf > 0)[0], config.goal_tolerance,
                 log_rows, n)

    # ---- grasp stabilization ----
    if config.guide_gs and tau.any():
        kappa = x[:, POSE_DIM:]
        targets = stabilized_wrist(kappa, tau, track)  # fixed during descent
        wrist_idx = [skeleton.left_wrist, skeleton.right_wrist]

        def gs_goal_full(pose):
            pos, _ = fk_pose_batch(pose)
            return goal_gs_per_frame(pos[..., wrist_idx, :], targets, tau)

        def gs_goal_of_poses(frames):
            tgt = targets[frames]
            tf = tau[frames]

            def fn(batch):
                pos, _ = fk_pose_batch(batch)
                return goal_gs_per_frame(pos[..., wrist_idx, :], tgt, tf)
            return fn

        _descend(x, "gs", masks.upper_body, config.gs_rate, config.gs_iterations,
                 variance, gs_goal_full, gs_goal_of_poses,
                 lambda pf: np.nonzero(pf > config.goal_tolerance / max(T, 1))[0],
                 config.goal_tolerance, log_rows, n)

    # ---- hand-object contact ----
    if config.guide_ho:
        left_idx, right_idx = default_hand_sample_indices(skeleton, config.hand_samples)
        hand_params = []
        if tau[:, 0].any():
            hand_params.append(masks.left_hand)
        if tau[:, 1].any():
            hand_params.append(masks.right_hand)
        if hand_params:
            param_idx = np.concatenate(hand_params)

            def sdf_points(pos, rot, vert_idx, frames):
                bj = skeleton.vertex_joints[vert_idx]
                off = skeleton.vertex_offsets[vert_idx]
                pts = np.einsum("...vij,vj->...vi", rot[..., bj, :, :], off) \
                    + pos[..., bj, :]
                # into the object rest frame: (p - t) @ R_col
                local = np.einsum("...tvi,tij->...tvj",
                                  pts - trans[frames][:, None, :], rot_cols[frames])
                return rest_field.sdf(local.reshape(-1, 3)).reshape(local.shape[:-1])

            def ho_goal_full(pose):
                pos, rot = fk_pose_batch(pose)
                sl = sdf_points(pos, rot, left_idx, np.arange(T))
                sr = sdf_points(pos, rot, right_idx, np.arange(T))
                return goal_ho_per_frame(sl, sr, tau, config.lambda_ho)

            def ho_goal_of_poses(frames):
                tf = tau[frames]

                def fn(batch):
                    pos, rot = fk_pose_batch(batch)
                    sl = sdf_points(pos, rot, left_idx, frames)
                    sr = sdf_points(pos, rot, right_idx, frames)
                    return goal_ho_per_frame(sl, sr, tf, config.lambda_ho)
                return fn

            _descend(x, "ho", param_idx, config.ho_rate, config.ho_iterations,
                     variance, ho_goal_full, ho_goal_of_poses,
                     lambda pf: np.nonzero(pf > config.goal_tolerance / max(T, 1))[0],
                     config.goal_tolerance, log_rows, n)

    return x


def write_guidance_log(rows, path) -> None:
    """CSV log: one row per (step, term, iteration, goal value)."""
    with open(path, "w") as f:
        f.write("step,term,iteration,goal\n")
        for step, term, it, goal in rows:
            f.write(f"{'' if step is None else step},{term},{it},{goal!r}\n")


def make_guide_fn(skeleton: Skeleton, identity: Identity, track: ObjectTrack,
                  rest_field: SignedField, schedule, config: GuidanceConfig,
                  mean: np.ndarray, std: np.ndarray,
                  masks: ParameterMask | None = None,
                  log_rows: list | None = None):
    """Wire apply_guidance into a sampling-time guide on normalized batches."""
    if not config.any_enabled:
        return lambda x0, n: x0

    def guide(x0_norm: np.ndarray, n: int) -> np.ndarray:
        out = np.empty_like(x0_norm)
        for b in range(x0_norm.shape[0]):
            denorm = x0_norm[b] * std + mean
            tau = contact_labels_from_kappa(denorm[:, POSE_DIM:],
                                            config.kappa_threshold)
            guided = apply_guidance(denorm, n, tau, track, skeleton, identity,
                                    rest_field, schedule, config, masks, log_rows)
            out[b] = (guided - mean) / std
        return out

    return guide
