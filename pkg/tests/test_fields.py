import numpy as np
import pytest

from impscat import (
    Medium,
    PlaneWave,
    curl_incident,
    grad_green,
    green,
    hess_green,
    incident_field,
    interaction_kernel,
)

RNG = np.random.default_rng(1234)


def fd_gradient(f, x, h):
    g = np.zeros(3, dtype=complex)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_curl(f, x, h):
    c = np.zeros(3, dtype=complex)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        dp, dm = f(x + e), f(x - e)
        d = (dp - dm) / (2 * h)
        # accumulate epsilon_{jik} d_i f_k
        if i == 0:
            c[1] -= d[2]
            c[2] += d[1]
        elif i == 1:
            c[0] += d[2]
            c[2] -= d[0]
        else:
            c[0] -= d[1]
            c[1] += d[0]
    return c


class TestGreen:
    def test_static_unit_distance(self):
        assert green([1.0, 0, 0], [0, 0, 0], 0.0) == pytest.approx(1 / (4 * np.pi))

    def test_full_period_phase(self):
        # k r = 2 pi: phase factor is exactly 1
        val = green([0, 1.0, 0], [0, 0, 0], 2 * np.pi)
        assert val == pytest.approx(1 / (4 * np.pi), rel=1e-12)

    def test_against_high_precision_value(self):
        # e^{0.5 i} / (2 pi), frozen from a 30-digit mpmath evaluation
        expected = 0.13967160269610198607 + 0.076302944313353198915j
        val = green([0.5, 0, 0], [0, 0, 0], 1.0)
        assert abs(val - expected) < 1e-15

    def test_coincident_points_rejected(self):
        with pytest.raises(ValueError, match="singular"):
            green([1.0, 2.0, 3.0], [1.0, 2.0, 3.0], 1.0)

    def test_radiation_behavior(self):
        # |r (dg/dr - i k g)| = 1/(4 pi r) must decrease toward zero
        k = 2.0
        vals = []
        for r in (1e2 / k, 1e3 / k, 1e4 / k):
            x = np.array([r, 0, 0])
            dg_dr = grad_green(x, np.zeros(3), k) @ np.array([1.0, 0, 0])
            vals.append(abs(r * (dg_dr - 1j * k * green(x, np.zeros(3), k))))
        assert vals[0] > vals[1] > vals[2]
        assert vals[2] < 1e-4


class TestGradGreen:
    def test_matches_finite_differences(self):
        k = 1.0
        for _ in range(10):
            x = RNG.normal(size=3)
            y = RNG.normal(size=3)
            r = np.linalg.norm(x - y)
            if r < 0.3:
                continue
            h = 1e-5 * max(1.0, r)
            fd = fd_gradient(lambda z: green(z, y, k), x, h)
            an = grad_green(x, y, k)
            assert np.abs(an - fd).max() < 1e-6 * np.abs(an).max()

    def test_static_limit(self):
        x, y = np.array([0.3, -0.2, 0.9]), np.array([-0.1, 0.4, 0.1])
        d = x - y
        r = np.linalg.norm(d)
        expected = -d / (4 * np.pi * r**3)
        assert np.allclose(grad_green(x, y, 0.0), expected, rtol=1e-13)

    def test_radial_direction(self):
        x, y = np.array([1.0, 2.0, -1.0]), np.array([0.5, 0.5, 0.5])
        g = grad_green(x, y, 2.0)
        cr = np.cross(g, x - y)
        assert np.abs(cr).max() < 1e-14 * np.abs(g).max()


class TestHessGreen:
    def test_matches_finite_differences(self):
        k = 1.0
        x, y = np.array([0.8, -0.4, 0.6]), np.array([0.0, 0.2, -0.1])
        r = np.linalg.norm(x - y)
        h = 1e-5 * max(1.0, r)
        fd = np.stack(
            [fd_gradient(lambda z: grad_green(z, y, k)[i], x, h) for i in range(3)]
        )
        an = hess_green(x, y, k)
        assert np.abs(an - fd).max() < 1e-5 * np.abs(an).max()

    def test_helmholtz_trace(self):
        for _ in range(20):
            x = RNG.normal(size=3)
            y = RNG.normal(size=3)
            if np.linalg.norm(x - y) < 0.1:
                continue
            k = RNG.uniform(0.5, 3.0)
            tr = np.trace(hess_green(x, y, k))
            expected = -(k**2) * green(x, y, k)
            assert abs(tr - expected) < 1e-12 * abs(expected)

    def test_symmetry(self):
        m = hess_green([1.0, 0.2, -0.3], [0.1, 0.1, 0.4], 1.7)
        assert np.abs(m - m.T).max() < 1e-15 * np.abs(m).max()


class TestInteractionKernel:
    def test_matches_finite_difference_curl(self):
        # K v = curl_x (grad g x v) for constant v
        k = 1.0
        for _ in range(10):
            x = RNG.normal(size=3) * 2
            y = RNG.normal(size=3)
            r = np.linalg.norm(x - y)
            if r < 0.5:
                continue
            v = RNG.normal(size=3)
            h = 1e-5 * max(1.0, r)
            fd = fd_curl(lambda z: np.cross(grad_green(z, y, k), v), x, h)
            an = interaction_kernel(x, y, k) @ v
            assert np.abs(an - fd).max() < 1e-5 * np.abs(an).max()

    def test_static_limit_equals_hessian(self):
        # at k = 0 the k^2 g term vanishes identically
        x, y = np.array([1.0, -0.5, 0.25]), np.array([0.2, 0.2, 0.2])
        v = (x - y) / np.linalg.norm(x - y)
        kv = interaction_kernel(x, y, 0.0) @ v
        hv = hess_green(x, y, 0.0) @ v
        assert np.allclose(kv, hv, rtol=1e-14)

    def test_symmetric_matrix(self):
        m = interaction_kernel([0.9, 0.1, 0.5], [0.0, -0.2, 0.0], 1.3)
        assert np.abs(m - m.T).max() < 1e-15 * np.abs(m).max()

    def test_argument_exchange(self):
        # kernel depends on x - y through even terms only
        for _ in range(10):
            x = RNG.normal(size=3)
            y = RNG.normal(size=3)
            if np.linalg.norm(x - y) < 0.1:
                continue
            kxy = interaction_kernel(x, y, 0.8)
            kyx = interaction_kernel(y, x, 0.8)
            assert np.abs(kxy - kyx).max() < 1e-14 * np.abs(kxy).max()


class TestIncidentField:
    def test_zero_phase_at_origin(self, plane_wave, medium):
        assert np.allclose(incident_field(plane_wave, medium, [0.0, 0, 0]), plane_wave.amplitude)

    def test_unimodular_phase(self, plane_wave, medium):
        for _ in range(10):
            x = RNG.normal(size=3) * 5
            v = incident_field(plane_wave, medium, x)
            assert np.linalg.norm(v) == pytest.approx(np.linalg.norm(plane_wave.amplitude))

    def test_transverse_everywhere(self, plane_wave, medium):
        xs = RNG.normal(size=(20, 3))
        vals = incident_field(plane_wave, medium, xs)
        assert np.abs(vals @ plane_wave.direction).max() < 1e-14

    def test_batched_shape(self, plane_wave, medium):
        assert incident_field(plane_wave, medium, RNG.normal(size=(4, 5, 3))).shape == (4, 5, 3)


class TestCurlIncident:
    def test_matches_finite_differences(self, plane_wave, medium):
        x = np.array([0.3, 0.7, -0.2])
        fd = fd_curl(lambda z: incident_field(plane_wave, medium, z), x, 1e-5)
        an = curl_incident(plane_wave, medium, x)
        assert np.abs(an - fd).max() < 1e-6 * np.abs(an).max()

    def test_magnitude(self, medium):
        pw = PlaneWave(amplitude=[0.0, 2.0, 0.0], direction=[1.0, 0.0, 0.0])
        for _ in range(5):
            v = curl_incident(pw, medium, RNG.normal(size=3))
            assert np.linalg.norm(v) == pytest.approx(medium.k * 2.0)

    def test_zero_amplitude(self, medium):
        pw = PlaneWave(amplitude=[0.0, 0.0, 0.0], direction=[0.0, 1.0, 0.0])
        assert np.allclose(curl_incident(pw, medium, [1.0, 1.0, 1.0]), 0.0)


class TestValidation:
    def test_medium_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            Medium(epsilon0=-1.0, mu0=1.0, omega=1.0)
        with pytest.raises(ValueError):
            Medium(epsilon0=1.0, mu0=0.0, omega=1.0)

    def test_medium_wavenumber(self):
        med = Medium(epsilon0=4.0, mu0=9.0, omega=2.0)
        assert med.k == pytest.approx(12.0)

    def test_plane_wave_requires_unit_direction(self):
        with pytest.raises(ValueError, match="unit"):
            PlaneWave(amplitude=[1, 0, 0], direction=[0, 0, 2.0])

    def test_plane_wave_requires_transversality(self):
        with pytest.raises(ValueError, match="transverse"):
            PlaneWave(amplitude=[0, 0, 1.0], direction=[0, 0, 1.0])

    def test_cross_product_antisymmetry(self):
        u = RNG.normal(size=3) + 1j * RNG.normal(size=3)
        v = RNG.normal(size=3) + 1j * RNG.normal(size=3)
        assert np.allclose(np.cross(u, v), -np.cross(v, u))

    def test_cross_product_orthogonality(self):
        u = RNG.normal(size=3)
        v = RNG.normal(size=3) + 1j * RNG.normal(size=3)
        assert abs(u @ np.cross(u, v)) < 1e-14
