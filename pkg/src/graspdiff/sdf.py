"""Signed distance fields: analytic primitives and mesh-backed fields.

Convention: negative strictly inside, positive strictly outside. Mesh fields
report exact unsigned distance (BVH over triangles, batched traversal) with
the sign taken from the generalized winding number, which keeps signing
robust to near-degenerate triangles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyGeometry, UnsignedOnly
from .geometry import ObjectMesh, ObjectMotionFrame, load_obj, make_box, make_cylinder, make_icosphere


class SignedField:
    """Base class; subclasses implement sdf() on (N, 3) points."""

    signed = True

    def sdf(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def transformed(self, frame: ObjectMotionFrame) -> "SignedField":
        """Field of this geometry posed into the world at `frame`."""
        return PosedField(self, frame)


@dataclass(frozen=True)
class SphereField(SignedField):
    radius: float

    def sdf(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        return np.linalg.norm(points, axis=-1) - self.radius


@dataclass(frozen=True)
class BoxField(SignedField):
    half_extents: tuple[float, float, float]

    def sdf(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        q = np.abs(points) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class CylinderField(SignedField):
    """Cylinder along the local z axis."""

    radius: float
    half_height: float

    def sdf(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        dr = np.linalg.norm(points[..., :2], axis=-1) - self.radius
        dz = np.abs(points[..., 2]) - self.half_height
        d = np.stack([dr, dz], axis=-1)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(d.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class PosedField(SignedField):
    """A rest-frame field rigidly posed into the world."""

    base: SignedField
    frame: ObjectMotionFrame

    @property
    def signed(self):  # type: ignore[override]
        return self.base.signed

    def sdf(self, points):
        return self.base.sdf(self.frame.unapply(np.atleast_2d(points)))

    def transformed(self, frame):
        return PosedField(self.base, frame)


def sdf_query(field: SignedField, point: np.ndarray) -> float:
    """Signed distance of a single point (meters, negative inside)."""
    return float(field.sdf(np.asarray(point, dtype=np.float64).reshape(1, 3))[0])


def sdf_gradient(field: SignedField, points: np.ndarray, h: float = 1e-5) -> np.ndarray:
    """Central-difference spatial gradient of the field, (N, 3)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    grad = np.empty_like(points)
    for a in range(3):
        dp = np.zeros(3)
        dp[a] = h
        grad[:, a] = (field.sdf(points + dp) - field.sdf(points - dp)) / (2 * h)
    return grad


# ---------------------------------------------------------------------------
# Point-to-triangle distance
# ---------------------------------------------------------------------------

def closest_point_on_triangles(p, a, b, c):
    """Closest points on triangles (a, b, c) to points p, all (..., 3)."""
    ab = b - a
    ac = c - a
    ap = p - a

    d1 = np.sum(ab * ap, axis=-1)
    d2 = np.sum(ac * ap, axis=-1)
    bp = p - b
    d3 = np.sum(ab * bp, axis=-1)
    d4 = np.sum(ac * bp, axis=-1)
    cp = p - c
    d5 = np.sum(ab * cp, axis=-1)
    d6 = np.sum(ac * cp, axis=-1)

    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    with np.errstate(divide="ignore", invalid="ignore"):
        v_ab = d1 / (d1 - d3)
        v_ac = d2 / (d2 - d6)
        v_bc = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        denom = 1.0 / (va + vb + vc)
        v = vb * denom
        w = vc * denom

    def lerp(t):
        return t[..., None]

    out = a + lerp(np.nan_to_num(v)) * ab + lerp(np.nan_to_num(w)) * ac  # face region
    reg_bc = (va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0)
    out = np.where(lerp(reg_bc), b + lerp(np.nan_to_num(v_bc)) * (c - b), out)
    reg_ac = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    out = np.where(lerp(reg_ac), a + lerp(np.nan_to_num(v_ac)) * ac, out)
    reg_ab = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    out = np.where(lerp(reg_ab), a + lerp(np.nan_to_num(v_ab)) * ab, out)
    reg_c = (d6 >= 0) & (d5 <= d6)
    out = np.where(lerp(reg_c), c, out)
    reg_b = (d3 >= 0) & (d4 <= d3)
    out = np.where(lerp(reg_b), b, out)
    reg_a = (d1 <= 0) & (d2 <= 0)
    out = np.where(lerp(reg_a), a, out)
    return out


# ---------------------------------------------------------------------------
# BVH over triangles
# ---------------------------------------------------------------------------

class _Bvh:
    """Binary BVH with surface-area-heuristic splits, array storage."""

    LEAF_SIZE = 8
    SAH_BINS = 8

    def __init__(self, tri_verts: np.ndarray):
        # tri_verts: (F, 3, 3)
        nf = len(tri_verts)
        self.tri_verts = tri_verts
        lo = tri_verts.min(axis=1)
        hi = tri_verts.max(axis=1)
        cent = 0.5 * (lo + hi)
        order = np.arange(nf)

        self.node_lo: list[np.ndarray] = []
        self.node_hi: list[np.ndarray] = []
        self.node_left: list[int] = []
        self.node_right: list[int] = []
        self.node_start: list[int] = []
        self.node_count: list[int] = []

        def new_node(idx):
            ni = len(self.node_lo)
            self.node_lo.append(lo[idx].min(axis=0))
            self.node_hi.append(hi[idx].max(axis=0))
            self.node_left.append(-1)
            self.node_right.append(-1)
            self.node_start.append(0)
            self.node_count.append(0)
            return ni

        ordered: list[int] = []

        def build(idx):
            ni = new_node(idx)
            if len(idx) <= self.LEAF_SIZE:
                self.node_start[ni] = len(ordered)
                self.node_count[ni] = len(idx)
                ordered.extend(idx.tolist())
                return ni
            split = self._sah_split(idx, cent, lo, hi)
            if split is None:
                self.node_start[ni] = len(ordered)
                self.node_count[ni] = len(idx)
                ordered.extend(idx.tolist())
                return ni
            left_idx, right_idx = split
            self.node_left[ni] = build(left_idx)
            self.node_right[ni] = build(right_idx)
            return ni

        build(order)
        self.order = np.array(ordered, dtype=np.int64)
        self.node_lo = np.array(self.node_lo)
        self.node_hi = np.array(self.node_hi)
        self.node_left = np.array(self.node_left)
        self.node_right = np.array(self.node_right)
        self.node_start = np.array(self.node_start)
        self.node_count = np.array(self.node_count)

    def _sah_split(self, idx, cent, lo, hi):
        c = cent[idx]
        ext = c.max(axis=0) - c.min(axis=0)
        axis = int(np.argmax(ext))
        if ext[axis] < 1e-12:
            half = len(idx) // 2
            return idx[:half], idx[half:]
        edges = np.linspace(c[:, axis].min(), c[:, axis].max(), self.SAH_BINS + 1)
        best_cost, best_mask = np.inf, None
        for e in edges[1:-1]:
            mask = c[:, axis] <= e
            nl, nr = mask.sum(), (~mask).sum()
            if nl == 0 or nr == 0:
                continue
            cost = nl * _box_area(lo[idx[mask]], hi[idx[mask]]) + \
                nr * _box_area(lo[idx[~mask]], hi[idx[~mask]])
            if cost < best_cost:
                best_cost, best_mask = cost, mask
        if best_mask is None:
            half = len(idx) // 2
            srt = idx[np.argsort(c[:, axis])]
            return srt[:half], srt[half:]
        return idx[best_mask], idx[~best_mask]

    def closest(self, points: np.ndarray):
        """Unsigned distance and closest surface point for each query point."""
        n = len(points)
        best = np.full(n, np.inf)
        best_pt = np.zeros((n, 3))

        def box_dist(ni, idx):
            d = np.maximum(self.node_lo[ni] - points[idx], 0.0) + \
                np.maximum(points[idx] - self.node_hi[ni], 0.0)
            return np.linalg.norm(d, axis=-1)

        def descend(ni, idx):
            if len(idx) == 0:
                return
            left, right = self.node_left[ni], self.node_right[ni]
            if left < 0:  # leaf
                tris = self.order[self.node_start[ni]:self.node_start[ni] + self.node_count[ni]]
                tv = self.tri_verts[tris]  # (L, 3, 3)
                cp = closest_point_on_triangles(points[idx][:, None, :],
                                                tv[None, :, 0], tv[None, :, 1], tv[None, :, 2])
                d = np.linalg.norm(cp - points[idx][:, None, :], axis=-1)  # (n, L)
                k = np.argmin(d, axis=1)
                dmin = d[np.arange(len(idx)), k]
                upd = dmin < best[idx]
                gi = idx[upd]
                best[gi] = dmin[upd]
                best_pt[gi] = cp[np.arange(len(idx)), k][upd]
                return
            dl = box_dist(left, idx)
            dr = box_dist(right, idx)
            near_first = dl <= dr
            for first in (True, False):
                for child, d_child in ((left, dl), (right, dr)):
                    go_first = near_first if child == left else ~near_first
                    sel = (go_first == first) & (d_child < best[idx])
                    descend(child, idx[sel])

        descend(0, np.arange(n))
        return best, best_pt


def _box_area(lo, hi):
    if len(lo) == 0:
        return 0.0
    e = hi.max(axis=0) - lo.min(axis=0)
    return 2.0 * (e[0] * e[1] + e[1] * e[2] + e[2] * e[0])


# ---------------------------------------------------------------------------
# Mesh field
# ---------------------------------------------------------------------------

class MeshField(SignedField):
    """Exact unsigned distance (BVH) with winding-number sign."""

    def __init__(self, mesh: ObjectMesh):
        if len(mesh.triangles) == 0:
            raise EmptyGeometry("mesh has no triangles")
        self.mesh = mesh
        self.signed = mesh.is_watertight()
        self._bvh = _Bvh(mesh.vertices[mesh.triangles])

    def unsigned_distance(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d, _ = self._bvh.closest(points)
        return d

    def closest_points(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        _, cp = self._bvh.closest(points)
        return cp

    def winding_number(self, points: np.ndarray) -> np.ndarray:
        """Generalized winding number (~1 inside, ~0 outside)."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        tv = self.mesh.vertices[self.mesh.triangles]  # (F, 3, 3)
        out = np.empty(len(points))
        chunk = max(1, int(3e6 / max(len(tv), 1)))
        for s in range(0, len(points), chunk):
            p = points[s:s + chunk]
            a = tv[None, :, 0] - p[:, None, :]
            b = tv[None, :, 1] - p[:, None, :]
            c = tv[None, :, 2] - p[:, None, :]
            la = np.linalg.norm(a, axis=-1)
            lb = np.linalg.norm(b, axis=-1)
            lc = np.linalg.norm(c, axis=-1)
            det = np.sum(a * np.cross(b, c), axis=-1)
            denom = (la * lb * lc + np.sum(a * b, axis=-1) * lc
                     + np.sum(b * c, axis=-1) * la + np.sum(c * a, axis=-1) * lb)
            out[s:s + chunk] = np.sum(2.0 * np.arctan2(det, denom), axis=1) / (4 * np.pi)
        return out

    def sdf(self, points):
        if not self.signed:
            raise UnsignedOnly("mesh is not watertight; only unsigned distance is defined")
        d = self.unsigned_distance(points)
        inside = self.winding_number(points) > 0.5
        return np.where(inside, -d, d)


# ---------------------------------------------------------------------------
# Object specs (serializable geometry handles used in track/dataset files)
# ---------------------------------------------------------------------------

def mesh_from_spec(spec: dict) -> ObjectMesh:
    kind = spec["type"]
    if kind == "sphere":
        r = spec["radius"]
        sub = spec.get("subdivisions", _sphere_subdivisions(r))
        return make_icosphere(r, sub)
    if kind == "box":
        return make_box(spec["half_extents"], spacing=spec.get("spacing", 0.006))
    if kind == "cylinder":
        return make_cylinder(spec["radius"], spec["half_height"],
                             spacing=spec.get("spacing", 0.006))
    if kind == "mesh":
        return load_obj(spec["path"])
    raise ValueError(f"unknown object spec type: {kind}")


def field_from_spec(spec: dict) -> SignedField:
    kind = spec["type"]
    if kind == "sphere":
        return SphereField(spec["radius"])
    if kind == "box":
        return BoxField(tuple(spec["half_extents"]))
    if kind == "cylinder":
        return CylinderField(spec["radius"], spec["half_height"])
    if kind == "mesh":
        return MeshField(load_obj(spec["path"]))
    raise ValueError(f"unknown object spec type: {kind}")


def _sphere_subdivisions(radius: float) -> int:
    # icosahedron edge ~ 1.05 r halves per subdivision; aim for ~5 mm edges
    edge = 1.05 * radius
    sub = 0
    while edge > 0.005 and sub < 5:
        edge /= 2
        sub += 1
    return max(sub, 2)
