import numpy as np
import pytest

from graspdiff.errors import UnsignedOnly
from graspdiff.geometry import ObjectMesh, ObjectMotionFrame, make_box, make_icosphere
from graspdiff.sdf import (
    BoxField,
    CylinderField,
    MeshField,
    SphereField,
    closest_point_on_triangles,
    field_from_spec,
    mesh_from_spec,
    sdf_gradient,
    sdf_query,
)


def sphere_chordal_bound(mesh, radius):
    """Max deviation of an inscribed icosphere surface from the true sphere."""
    tv = mesh.vertices[mesh.triangles]
    centroids = tv.mean(axis=1)
    return radius - np.linalg.norm(centroids, axis=1).min()


class TestAnalyticFields:
    def test_sphere_outside(self):
        f = SphereField(0.1)
        assert np.isclose(sdf_query(f, [0.15, 0, 0]), 0.05)

    def test_sphere_center(self):
        assert np.isclose(sdf_query(SphereField(0.1), [0, 0, 0]), -0.1)

    def test_box_faces_and_corner(self):
        f = BoxField((0.1, 0.2, 0.3))
        assert np.isclose(sdf_query(f, [0.15, 0, 0]), 0.05)
        assert np.isclose(sdf_query(f, [0, 0, 0]), -0.1)
        corner = np.array([0.2, 0.3, 0.4])
        assert np.isclose(sdf_query(f, corner), np.linalg.norm(corner - [0.1, 0.2, 0.3]))

    def test_cylinder(self):
        f = CylinderField(0.05, 0.1)
        assert np.isclose(sdf_query(f, [0.08, 0, 0]), 0.03)
        assert np.isclose(sdf_query(f, [0, 0, 0.15]), 0.05)
        assert np.isclose(sdf_query(f, [0, 0, 0]), -0.05)

    def test_posed_field(self, rng):
        from graspdiff.body import rot6d_to_matrix
        R = rot6d_to_matrix(rng.normal(size=6) + np.array([2, 0, 0, 0, 2, 0]))
        t = rng.normal(size=3)
        frame = ObjectMotionFrame.from_rotation(R, t, np.zeros(3))
        f = SphereField(0.1).transformed(frame)
        p = rng.normal(size=(50, 3))
        expected = np.linalg.norm(p - t, axis=1) - 0.1  # sphere is rotation invariant
        assert np.allclose(f.sdf(p), expected, atol=1e-12)

    def test_gradient_unit_norm_away_from_surface(self, rng):
        # |grad sdf| = 1 within 1e-3 at points >= 1 cm from surface and medial axis
        for f in (SphereField(0.08), BoxField((0.05, 0.06, 0.07)), CylinderField(0.05, 0.08)):
            p = rng.uniform(-0.3, 0.3, size=(500, 3))
            d = f.sdf(p)
            keep = d > 0.01  # outside, clear of surface and medial axis
            g = sdf_gradient(f, p[keep])
            assert np.abs(np.linalg.norm(g, axis=1) - 1.0).max() <= 1e-3


class TestClosestPoint:
    def test_matches_dense_sampling_oracle(self, rng):
        # oracle: dense barycentric sampling of the triangle
        u = np.linspace(0, 1, 120)
        uu, vv = np.meshgrid(u, u)
        keep = (uu + vv) <= 1.0
        uu, vv = uu[keep], vv[keep]
        for _ in range(20):
            a, b, c = rng.normal(size=(3, 3))
            p = rng.normal(size=3)
            cp = closest_point_on_triangles(p, a, b, c)
            dense = a + uu[:, None] * (b - a) + vv[:, None] * (c - a)
            d_or = np.linalg.norm(dense - p, axis=1).min()
            d_cp = np.linalg.norm(cp - p)
            assert d_cp <= d_or + 1e-4


class TestMeshField:
    def test_icosphere_vs_analytic_sphere(self, rng):
        radius = 0.06
        mesh = make_icosphere(radius, 3)
        field = MeshField(mesh)
        bound = sphere_chordal_bound(mesh, radius) + 1e-9
        p = rng.uniform(-0.15, 0.15, size=(2000, 3))
        exact = np.linalg.norm(p, axis=1) - radius
        approx = field.sdf(p)
        assert np.abs(approx - exact).max() <= bound
        # sign agreement for points >= 1 mm from the surface
        clear = np.abs(exact) >= 1e-3
        assert np.all(np.sign(approx[clear]) == np.sign(exact[clear]))

    def test_box_mesh_vs_analytic_box(self, rng):
        he = (0.04, 0.05, 0.03)
        mesh = make_box(he)
        field = MeshField(mesh)
        analytic = BoxField(he)
        p = rng.uniform(-0.12, 0.12, size=(1500, 3))
        exact = analytic.sdf(p)
        approx = field.sdf(p)
        # box mesh lies exactly on the box surface
        assert np.abs(approx - exact).max() <= 1e-9
        clear = np.abs(exact) >= 1e-3
        assert np.all(np.sign(approx[clear]) == np.sign(exact[clear]))

    def test_open_mesh_unsigned_only(self):
        tri = ObjectMesh(np.array([[0.0, 0, 0], [1, 0, 0], [0, 1, 0]]),
                         np.array([[0, 1, 2]], dtype=np.int64))
        field = MeshField(tri)
        assert not field.signed
        with pytest.raises(UnsignedOnly):
            field.sdf(np.array([[0.2, 0.2, 0.5]]))
        assert np.isclose(field.unsigned_distance(np.array([[0.2, 0.2, 0.5]]))[0], 0.5)

    def test_winding_number_values(self, rng):
        mesh = make_icosphere(0.05, 2)
        field = MeshField(mesh)
        inside = rng.normal(size=(50, 3))
        inside = inside / np.linalg.norm(inside, axis=1, keepdims=True) * 0.02
        outside = inside * 10
        assert np.all(field.winding_number(inside) > 0.9)
        assert np.all(np.abs(field.winding_number(outside)) < 0.1)

    def test_posed_mesh_field(self, rng):
        from graspdiff.body import rot6d_to_matrix
        mesh = make_icosphere(0.05, 2)
        R = rot6d_to_matrix(rng.normal(size=6) + np.array([2, 0, 0, 0, 2, 0]))
        frame = ObjectMotionFrame.from_rotation(R, [0.1, 0.2, 0.3], mesh.centroid)
        field = MeshField(mesh).transformed(frame)
        p = rng.uniform(-0.1, 0.1, size=(200, 3)) + np.array([0.1, 0.2, 0.3])
        exact = np.linalg.norm(p - [0.1, 0.2, 0.3], axis=1) - 0.05
        bound = sphere_chordal_bound(mesh, 0.05) + 1e-9
        assert np.abs(field.sdf(p) - exact).max() <= bound


class TestSpecs:
    @pytest.mark.parametrize("spec", [
        {"type": "sphere", "radius": 0.05},
        {"type": "box", "half_extents": [0.03, 0.04, 0.05]},
        {"type": "cylinder", "radius": 0.03, "half_height": 0.05},
    ])
    def test_mesh_matches_field(self, spec, rng):
        mesh = mesh_from_spec(spec)
        field = field_from_spec(spec)
        assert mesh.is_watertight()
        # mesh vertices lie on the zero level set of the analytic field
        assert np.abs(field.sdf(mesh.vertices)).max() <= 1e-9

    def test_mesh_spec_density(self):
        # vertex spacing tight enough that surface contact registers at 5 mm
        for spec in ({"type": "sphere", "radius": 0.05},
                     {"type": "box", "half_extents": [0.04, 0.04, 0.04]}):
            mesh = mesh_from_spec(spec)
            tv = mesh.vertices[mesh.triangles]
            edge = np.linalg.norm(tv - np.roll(tv, 1, axis=1), axis=2)
            assert edge.max() < 0.009
