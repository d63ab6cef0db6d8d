import numpy as np
import pytest
from scipy.integrate import quad

from impscat import (
    Ellipsoid,
    Sphere,
    TriMesh,
    build_quadrature,
    compute_b,
    compute_beta,
    compute_shape_matrices,
    load_trimesh,
    rotate_quadrature,
    save_trimesh,
    surface_samples,
)
from impscat.geometry import beta_samples

from conftest import cube_mesh, icosphere

RNG = np.random.default_rng(77)


def random_rotation(rng):
    q = rng.normal(size=4)
    q /= np.linalg.norm(q)
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


class TestQuadrature:
    def test_sphere_area(self):
        q = build_quadrature(Sphere(1.0), order=32)
        assert q.weights.sum() == pytest.approx(4 * np.pi, rel=1e-10)

    @pytest.mark.parametrize("radius", [0.01, 0.5, 3.0])
    def test_sphere_area_scaling(self, radius):
        q = build_quadrature(Sphere(radius), order=16)
        assert q.weights.sum() == pytest.approx(4 * np.pi * radius**2, rel=1e-10)

    def test_cube_mesh_area(self):
        q = build_quadrature(cube_mesh(1.0))
        assert q.weights.sum() == pytest.approx(6.0, rel=1e-12)

    def test_ellipsoid_area_against_adaptive_quadrature(self):
        # prolate spheroid (1, 1, 2): reduce the area integral to 1D
        a, c = 1.0, 2.0
        area = quad(
            lambda th: 2 * np.pi * a * np.sin(th) * np.sqrt(
                c**2 * np.sin(th) ** 2 + a**2 * np.cos(th) ** 2
            ),
            0.0,
            np.pi,
            epsabs=1e-12,
        )[0]
        q = build_quadrature(Ellipsoid((a, a, c)), order=48)
        assert q.weights.sum() == pytest.approx(area, rel=1e-9)

    def test_unit_normals(self):
        for shape in (Sphere(2.0), Ellipsoid((1.0, 0.5, 2.0)), cube_mesh()):
            q = build_quadrature(shape, order=12)
            assert np.abs(np.linalg.norm(q.normals, axis=1) - 1.0).max() < 1e-12

    def test_closed_surface_normal_identity(self):
        for shape in (Sphere(1.0), Ellipsoid((1.0, 0.5, 2.0)), cube_mesh()):
            q = build_quadrature(shape, order=24)
            resultant = q.weights @ q.normals
            a = shape.half_diameter
            assert np.abs(resultant).max() < 1e-6 * q.weights.sum() / a

    def test_positive_weights(self):
        q = build_quadrature(Ellipsoid((0.3, 1.0, 1.7)), order=16)
        assert np.all(q.weights > 0)

    def test_degenerate_mesh_rejected(self):
        mesh = cube_mesh()
        verts = mesh.vertices.copy()
        verts[1] = verts[0]  # collapse an edge: two faces lose their area
        bad = TriMesh(verts, mesh.faces)
        with pytest.raises(ValueError, match="zero-area"):
            build_quadrature(bad)

    def test_order_validation(self):
        with pytest.raises(ValueError):
            build_quadrature(Sphere(1.0), order=0)


class TestMeshValidation:
    def test_open_mesh_rejected(self):
        mesh = cube_mesh()
        with pytest.raises(ValueError, match="closed"):
            TriMesh(mesh.vertices, mesh.faces[:-1])

    def test_inverted_mesh_rejected(self):
        mesh = cube_mesh()
        flipped = mesh.faces[:, ::-1]
        with pytest.raises(ValueError, match="outward"):
            TriMesh(mesh.vertices, flipped)

    def test_half_diameter(self):
        mesh = cube_mesh(2.0)
        assert mesh.half_diameter == pytest.approx(np.sqrt(3.0))

    def test_signed_volume(self):
        assert cube_mesh(1.0).signed_volume() == pytest.approx(1.0)


class TestMatrixB:
    def test_sphere_is_third_identity(self):
        q = build_quadrature(Sphere(1.0), order=32)
        assert np.abs(compute_b(q) - np.eye(3) / 3).max() < 1e-6

    @pytest.mark.parametrize(
        "shape", [Sphere(0.2), Ellipsoid((1.0, 0.7, 0.4)), cube_mesh(), icosphere(2)]
    )
    def test_trace_is_one(self, shape):
        q = build_quadrature(shape, order=24)
        assert np.trace(compute_b(q)) == pytest.approx(1.0, abs=1e-10)

    def test_psd_with_unit_interval_eigenvalues(self):
        q = build_quadrature(Ellipsoid((1.0, 0.5, 0.25)), order=24)
        b = compute_b(q)
        assert np.abs(b - b.T).max() < 1e-14
        eig = np.linalg.eigvalsh(b)
        assert np.all(eig > -1e-14)
        assert np.all(eig < 1.0 + 1e-14)

    def test_prolate_ellipsoid_against_adaptive_oracle(self):
        # 1D reduction of b_33 for the (1, 1, 2) spheroid via adaptive
        # quadrature; frozen value from a 1e-13 epsabs run: 0.13831027225642056
        a, c = 1.0, 2.0

        def ds(th):
            return a * np.sin(th) * np.sqrt(c**2 * np.sin(th) ** 2 + a**2 * np.cos(th) ** 2)

        def n3sq(th):
            nn = np.sin(th) ** 2 / a**2 + np.cos(th) ** 2 / c**2
            return (np.cos(th) / c) ** 2 / nn

        area = quad(lambda th: 2 * np.pi * ds(th), 0, np.pi, epsabs=1e-13)[0]
        b33 = quad(lambda th: 2 * np.pi * ds(th) * n3sq(th), 0, np.pi, epsabs=1e-13)[0] / area
        assert b33 == pytest.approx(0.13831027225642056, abs=1e-12)

        b = compute_b(build_quadrature(Ellipsoid((a, a, c)), order=48))
        assert np.abs(b - np.diag([(1 - b33) / 2, (1 - b33) / 2, b33])).max() < 1e-8
        assert b[2, 2] < 1 / 3
        assert b[0, 0] == pytest.approx(b[1, 1], abs=1e-10)

    def test_refinement_convergence(self):
        shape = Ellipsoid((1.0, 0.6, 0.3))
        ref = compute_b(build_quadrature(shape, order=96))
        errs = [
            np.abs(compute_b(build_quadrature(shape, order=n)) - ref).max()
            for n in (6, 12, 24)
        ]
        assert errs[0] >= errs[1] >= errs[2] or max(errs) < 1e-12

    @pytest.mark.parametrize("radius", [0.01, 0.1, 1.0])
    def test_scale_invariance(self, radius):
        b = compute_b(build_quadrature(Sphere(radius), order=16))
        assert np.abs(b - np.eye(3) / 3).max() < 1e-10

    def test_rotation_equivariance(self):
        q = build_quadrature(Ellipsoid((1.0, 0.5, 0.25)), order=24)
        b = compute_b(q)
        for _ in range(3):
            rot = random_rotation(RNG)
            b_rot = compute_b(rotate_quadrature(q, rot))
            assert np.abs(b_rot - rot @ b @ rot.T).max() < 1e-8


class TestMatrixBeta:
    def test_sphere_average_is_sixth_identity(self):
        q = build_quadrature(Sphere(1.0), order=32)
        beta = compute_beta(q, surface_samples(Sphere(1.0), 6))
        assert np.abs(beta - np.eye(3) / 6).max() < 1e-10

    def test_sphere_off_diagonal_vanishes(self):
        q = build_quadrature(Sphere(1.0), order=32)
        beta = compute_beta(q, surface_samples(Sphere(1.0), 6))
        off = beta - np.diag(np.diag(beta))
        assert np.abs(off).max() < 1e-10

    def test_per_sample_trace_identity(self):
        # trace beta(t) = 1/2 for every on-surface t, any closed shape
        sph = Sphere(1.0)
        q = build_quadrature(sph, order=32)
        ts = sph.radius * np.array(
            [[0, 0, 1.0], [1.0, 0, 0], [0.6, 0.8, 0], [-0.36, 0.48, 0.8]]
        )
        for mat in beta_samples(q, ts):
            assert np.trace(mat) == pytest.approx(0.5, abs=1e-10)

    def test_per_sample_eigenvalues(self):
        # the single-point matrix has eigenvalues {1/3, 1/3, -1/6} with the
        # -1/6 eigenvector along t; only the average is isotropic
        sph = Sphere(2.0)
        q = build_quadrature(sph, order=32)
        t = 2.0 * np.array([0.48, -0.6, 0.64])
        mat = beta_samples(q, [t])[0]
        eig = np.sort(np.linalg.eigvalsh((mat + mat.T) / 2))
        assert np.allclose(eig, [-1 / 6, 1 / 3, 1 / 3], atol=1e-9)
        that = t / np.linalg.norm(t)
        assert np.abs(mat @ that - (-1 / 6) * that).max() < 1e-9

    def test_sample_deviation_diagnostic(self):
        sm = compute_shape_matrices(Sphere(1.0), order=24)
        # honest spread of the t-dependent matrices around the mean: 1/3
        assert sm.beta_spread == pytest.approx(1 / 3, abs=1e-6)

    @pytest.mark.parametrize("radius", [0.01, 0.1, 1.0])
    def test_scale_invariance(self, radius):
        sph = Sphere(radius)
        beta = compute_beta(build_quadrature(sph, order=24), surface_samples(sph, 6))
        assert np.abs(beta - np.eye(3) / 6).max() < 1e-9

    def test_ellipsoid_trace_identity(self):
        ell = Ellipsoid((1.0, 1.0, 2.0))
        q = build_quadrature(ell, order=32)
        for mat in beta_samples(q, surface_samples(ell, 4)):
            assert np.trace(mat) == pytest.approx(0.5, abs=1e-9)

    def test_mesh_trace_identity_diagnostic_grade(self):
        mesh = icosphere(2)
        q = build_quadrature(mesh)
        beta = compute_beta(q, surface_samples(mesh, 4))
        assert np.trace(beta) == pytest.approx(0.5, abs=0.05)

    def test_mesh_sphere_matches_analytic_loosely(self):
        mesh = icosphere(3)
        q = build_quadrature(mesh)
        beta = compute_beta(q, surface_samples(mesh, 6))
        assert np.abs(beta - np.eye(3) / 6).max() < 0.05

    def test_node_coincidence_rejected(self):
        mesh = cube_mesh()
        q = build_quadrature(mesh)
        # a centroid of a face is the first node of the 7-point rule
        with pytest.raises(ValueError):
            beta_samples(
                SurfaceLike(q.nodes, q.weights, q.normals), [q.nodes[0]]
            )

    def test_off_surface_sample_rejected(self):
        sph = Sphere(1.0)
        q = build_quadrature(sph, order=8)
        with pytest.raises(ValueError, match="surface"):
            compute_beta(q, [np.array([2.0, 0, 0])])


class SurfaceLike:
    """Anonymous quadrature without shape metadata (generic beta path)."""

    def __init__(self, nodes, weights, normals):
        self.nodes = nodes
        self.weights = weights
        self.normals = normals
        self.shape = None
        self.order = 0


class TestShapeMatrices:
    def test_sphere_xi(self, sphere_matrices):
        assert np.abs(sphere_matrices.xi - (4 / 7) * np.eye(3)).max() < 1e-4

    def test_sphere_c_s(self, sphere_matrices):
        assert sphere_matrices.c_s == pytest.approx(4 * np.pi, rel=1e-6)

    def test_sphere_tau(self, sphere_matrices):
        assert np.abs(sphere_matrices.tau - (2 / 3) * np.eye(3)).max() < 1e-6

    @pytest.mark.parametrize(
        "shape", [Sphere(1.0), Ellipsoid((1.0, 0.6, 0.3)), icosphere(2)]
    )
    def test_alpha_inverse_identity(self, shape):
        sm = compute_shape_matrices(shape, order=24)
        prod = (np.eye(3) + sm.alpha) @ (np.eye(3) + sm.beta)
        assert np.abs(prod - np.eye(3)).max() < 1e-10

    def test_xi_definition(self, sphere_matrices):
        sm = sphere_matrices
        assert np.abs(sm.xi - (np.eye(3) + sm.alpha) @ sm.tau).max() < 1e-14

    def test_xi_scalar_accessor(self, sphere_matrices):
        assert sphere_matrices.xi_scalar == pytest.approx(4 / 7, abs=1e-6)
        sm = compute_shape_matrices(Ellipsoid((1.0, 1.0, 3.0)), order=24)
        with pytest.raises(ValueError, match="scalar"):
            sm.xi_scalar

    def test_surface_area_and_c_s_consistency(self):
        sm = compute_shape_matrices(Sphere(0.05), order=16)
        assert sm.surface_area == pytest.approx(4 * np.pi * 0.05**2, rel=1e-9)
        assert sm.c_s == pytest.approx(sm.surface_area / 0.05**2, rel=1e-12)


class TestMeshIO:
    def test_off_round_trip(self, tmp_path):
        mesh = icosphere(1, radius=0.7)
        path = tmp_path / "mesh.off"
        save_trimesh(path, mesh)
        back = load_trimesh(path)
        assert np.array_equal(back.vertices, mesh.vertices)
        assert np.array_equal(back.faces, mesh.faces)

    def test_rejects_non_off(self, tmp_path):
        path = tmp_path / "bad.off"
        path.write_text("PLY\n0 0 0\n")
        with pytest.raises(ValueError, match="OFF"):
            load_trimesh(path)
