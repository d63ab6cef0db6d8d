"""Free-space Helmholtz kernels and incident plane-wave fields.

All field quantities are complex, frequency-domain, SI units. Complex
3-vectors and 3x3 matrices are plain numpy arrays of shape (..., 3) and
(..., 3, 3); every kernel broadcasts over leading axes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Medium",
    "PlaneWave",
    "green",
    "grad_green",
    "hess_green",
    "interaction_kernel",
    "incident_field",
    "curl_incident",
]

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Medium:
    """Homogeneous background: permittivity, permeability, angular frequency."""

    epsilon0: float
    mu0: float
    omega: float

    def __post_init__(self):
        for name in ("epsilon0", "mu0", "omega"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValueError(f"Medium.{name} must be a positive real, got {v!r}")

    @property
    def k(self) -> float:
        """Wavenumber omega*sqrt(epsilon0*mu0)."""
        return self.omega * np.sqrt(self.epsilon0 * self.mu0)

    @property
    def wavelength(self) -> float:
        return 2.0 * np.pi / self.k


@dataclass(frozen=True)
class PlaneWave:
    """Transverse plane wave: amplitude * exp(i k direction.x).

    amplitude may be complex; direction is a real unit vector orthogonal
    to the amplitude (checked to 1e-12).
    """

    amplitude: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitude, dtype=complex).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        object.__setattr__(self, "amplitude", amp)
        object.__setattr__(self, "direction", d)
        if abs(np.linalg.norm(d) - 1.0) > _UNIT_TOL:
            raise ValueError("PlaneWave.direction must be a unit vector")
        scale = max(np.linalg.norm(amp), 1.0)
        if abs(d @ amp) > _UNIT_TOL * scale:
            raise ValueError("PlaneWave is not transverse: direction . amplitude != 0")


def _separation(x, y):
    """Difference x - y and its norm; rejects coincident point pairs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d = x - y
    r = np.linalg.norm(d, axis=-1)
    if np.any(r == 0.0):
        raise ValueError("green kernel is singular at coincident points x == y")
    return d, r


def green(x, y, k: float):
    """Outgoing Helmholtz kernel exp(ikr)/(4 pi r), r = |x - y|."""
    _, r = _separation(x, y)
    return np.exp(1j * k * r) / (4.0 * np.pi * r)


def grad_green(x, y, k: float):
    """Gradient in x of the kernel: g * (ik - 1/r) * (x-y)/r."""
    d, r = _separation(x, y)
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    gp = g * (1j * k - 1.0 / r)
    return (gp / r)[..., None] * d


def hess_green(x, y, k: float):
    """Symmetric matrix of second x-derivatives of the kernel.

    With rhat = (x-y)/r the matrix is
        g''(r) rhat rhat^T + g'(r)/r (I - rhat rhat^T),
    g'(r) = g (ik - 1/r),  g''(r) = g (-k^2 - 2ik/r + 2/r^2).
    """
    d, r = _separation(x, y)
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    gp = g * (1j * k - 1.0 / r)
    gpp = g * (-(k * k) - 2j * k / r + 2.0 / (r * r))
    rhat = d / r[..., None]
    outer = rhat[..., :, None] * rhat[..., None, :]
    eye = np.eye(3)
    return gpp[..., None, None] * outer + (gp / r)[..., None, None] * (eye - outer)


def interaction_kernel(x, y, k: float):
    """Matrix K with K v = curl_x [grad_x g(x,y) x v] for constant v.

    Expanding the double cross product and using the Helmholtz equation
    away from the source gives K = k^2 g I + hess_green; the identity is
    verified against finite differences in the test suite.
    """
    d, r = _separation(x, y)
    g = np.exp(1j * k * r) / (4.0 * np.pi * r)
    gp = g * (1j * k - 1.0 / r)
    gpp = g * (-(k * k) - 2j * k / r + 2.0 / (r * r))
    rhat = d / r[..., None]
    outer = rhat[..., :, None] * rhat[..., None, :]
    eye = np.eye(3)
    hess = gpp[..., None, None] * outer + (gp / r)[..., None, None] * (eye - outer)
    return (k * k * g)[..., None, None] * eye + hess


def incident_field(pw: PlaneWave, med: Medium, x):
    """Plane-wave electric field amplitude * exp(i k direction.x)."""
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * med.k * (x @ pw.direction))
    return phase[..., None] * pw.amplitude


def curl_incident(pw: PlaneWave, med: Medium, x):
    """Curl of the plane wave: i k (direction x amplitude) exp(i k direction.x)."""
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * med.k * (x @ pw.direction))
    return (1j * med.k * phase)[..., None] * np.cross(pw.direction, pw.amplitude)
