"""Contact labels and the contact-aware training losses.

Labels are binary per frame and hand: from geometry (hand surface points vs
object mesh vertices under a distance threshold, strict) at training time, or
from the predicted wrist-to-centroid offsets kappa at inference time. Both
losses are exactly zero on non-contact frames/hands.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .errors import EmptyGeometry

GEOMETRY_THRESHOLD = 0.005   # 5 mm, shared with the metrics' contact threshold
KAPPA_THRESHOLD = 0.12       # wrist-to-centroid distance during grasps
ALPHA = 10.0                 # 1/m decay of the interaction weights
LAMBDA_WRIST = 1.0

_EPS = 1e-12


def contact_labels_from_geometry(hand_vertices_left: np.ndarray,
                                 hand_vertices_right: np.ndarray,
                                 object_vertices: np.ndarray,
                                 threshold: float = GEOMETRY_THRESHOLD) -> np.ndarray:
    """tau (T, 2): 1 iff the closest hand point is within `threshold` of an
    object vertex (strict inequality).

    hand vertices: (T, Vh, 3); object vertices: (T, Vo, 3) world posed.
    """
    if hand_vertices_left.size == 0 or object_vertices.size == 0:
        raise EmptyGeometry("empty hand or object geometry")
    T = hand_vertices_left.shape[0]
    tau = np.zeros((T, 2), dtype=np.int64)
    for t in range(T):
        tree = cKDTree(object_vertices[t])
        dl, _ = tree.query(hand_vertices_left[t])
        dr, _ = tree.query(hand_vertices_right[t])
        tau[t, 0] = 1 if dl.min() < threshold else 0
        tau[t, 1] = 1 if dr.min() < threshold else 0
    return tau


def contact_labels_from_geometry_local(hand_vertices_left, hand_vertices_right,
                                       mesh, track,
                                       threshold: float = GEOMETRY_THRESHOLD) -> np.ndarray:
    """Same labels, but with one static KD-tree on the rest mesh: hand points
    are pulled into the object frame per track frame."""
    tree = cKDTree(mesh.vertices)
    T = hand_vertices_left.shape[0]
    tau = np.zeros((T, 2), dtype=np.int64)
    for t, frame in enumerate(track.frames):
        dl, _ = tree.query(frame.unapply(hand_vertices_left[t]))
        dr, _ = tree.query(frame.unapply(hand_vertices_right[t]))
        tau[t, 0] = 1 if dl.min() < threshold else 0
        tau[t, 1] = 1 if dr.min() < threshold else 0
    return tau


def contact_labels_from_kappa(kappa: np.ndarray,
                              threshold: float = KAPPA_THRESHOLD) -> np.ndarray:
    """tau (T, 2) from wrist offsets: 1 iff |kappa_hand| < threshold (strict)."""
    kappa = np.asarray(kappa)
    left = np.linalg.norm(kappa[..., 0:3], axis=-1)
    right = np.linalg.norm(kappa[..., 3:6], axis=-1)
    return np.stack([left < threshold, right < threshold], axis=-1).astype(np.int64)


def contact_segments(tau_column: np.ndarray) -> list[tuple[int, int]]:
    """Maximal runs of 1s as inclusive (start, end) pairs."""
    segs = []
    start = None
    for t, v in enumerate(tau_column):
        if v and start is None:
            start = t
        elif not v and start is not None:
            segs.append((start, t - 1))
            start = None
    if start is not None:
        segs.append((start, len(tau_column) - 1))
    return segs


def export_labels_csv(tau: np.ndarray, path) -> None:
    with open(path, "w") as f:
        f.write("frame,left,right\n")
        for t, (l, r) in enumerate(np.asarray(tau)):
            f.write(f"{t},{int(l)},{int(r)}\n")


# ---------------------------------------------------------------------------
# Contact-aware reconstruction loss
# ---------------------------------------------------------------------------

def recon_loss(j_hat_l, j_hat_r, j_l, j_r, v_hat_l, v_hat_r, v_l, v_r, tau,
               lambda_wrist: float = LAMBDA_WRIST) -> float:
    """tau-masked hand-joint + wrist reconstruction error, mean over frames.

    Joint arrays: (T, K_hand, 3); wrists: (T, 3); tau: (T, 2). Per frame and
    hand the joint term is the Euclidean norm of the stacked joint residual.
    """
    value, _ = recon_loss_grad(j_hat_l, j_hat_r, j_l, j_r, v_hat_l, v_hat_r,
                               v_l, v_r, tau, lambda_wrist)
    return value


def recon_loss_grad(j_hat_l, j_hat_r, j_l, j_r, v_hat_l, v_hat_r, v_l, v_r, tau,
                    lambda_wrist: float = LAMBDA_WRIST):
    """Loss plus gradients w.r.t. the predictions (hand joints and wrists)."""
    tau = np.asarray(tau, dtype=np.float64)
    T = tau.shape[0]
    total = 0.0
    grads = []
    for hand, (jh, jg, vh, vg) in enumerate((
            (j_hat_l, j_l, v_hat_l, v_l), (j_hat_r, j_r, v_hat_r, v_r))):
        dj = (jh - jg).reshape(T, -1)
        jn = np.linalg.norm(dj, axis=1)
        dv = vh - vg
        vn = np.linalg.norm(dv, axis=1)
        m = tau[:, hand]
        total += float(np.sum(m * (jn + lambda_wrist * vn)))
        g_j = (m / np.maximum(jn, _EPS))[:, None] * dj
        g_v = (lambda_wrist * m / np.maximum(vn, _EPS))[:, None] * dv
        grads.append((g_j.reshape(jh.shape) / T, g_v / T))
    loss = total / T
    (gjl, gvl), (gjr, gvr) = grads
    return loss, (gjl, gjr, gvl, gvr)


# ---------------------------------------------------------------------------
# Contact-aware interaction loss
# ---------------------------------------------------------------------------

def interaction_weights(joints: np.ndarray, centroid: np.ndarray, tau: np.ndarray,
                        alpha: float = ALPHA) -> np.ndarray:
    """w_k = tau * exp(-alpha * d(J_k, O_m)) per frame and hand joint.

    joints: (T, K, 3) ground-truth hand joints of one hand; centroid: (T, 3);
    tau: (T,) labels of that hand.
    """
    d = np.linalg.norm(joints - centroid[:, None, :], axis=-1)
    return np.asarray(tau, dtype=np.float64)[:, None] * np.exp(-alpha * d)


def interaction_loss(j_hat, j, centroid, weights) -> float:
    value, _ = interaction_loss_grad(j_hat, j, centroid, weights)
    return value


def interaction_loss_grad(j_hat, j, centroid, weights):
    """Weighted centroid-distance discrepancy, mean over frames.

    j_hat, j: (T, K, 3); centroid: (T, 3); weights: (T, K). Each term is
    w_k * |d(J_hat_k, O_m) - d(J_k, O_m)|; gradient w.r.t. j_hat only.
    """
    T = j_hat.shape[0]
    rel_hat = j_hat - centroid[:, None, :]
    d_hat = np.linalg.norm(rel_hat, axis=-1)
    d_gt = np.linalg.norm(j - centroid[:, None, :], axis=-1)
    diff = d_hat - d_gt
    loss = float(np.sum(weights * np.abs(diff))) / T
    g = (weights * np.sign(diff) / np.maximum(d_hat, _EPS))[..., None] * rel_hat / T
    return loss, g
