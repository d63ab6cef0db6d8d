"""Closed-form scattering by a single small impedance particle.

The scattered field of a particle with half-diameter a, boundary
impedance zeta = h / a^kappa and shape matrices Xi = (I + alpha) tau is
determined by the single vector

    Q = -(zeta |S| / (i omega mu0)) Xi (curl E0)(O),

after which  E(x) = E0(x) + grad g(x, O) x Q  everywhere at distances
large compared to a. |Q| scales as a^(2-kappa), which dominates the
classical a^3 volume scaling for small a.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .fields import (
    Medium,
    PlaneWave,
    curl_incident,
    grad_green,
    green,
    incident_field,
    interaction_kernel,
)
from .geometry import ShapeMatrices

__all__ = [
    "Impedance",
    "OneBodySolution",
    "compute_Q",
    "scattered_field",
    "far_field",
    "magnetic_field",
    "solve_one_body",
]

# validity region of the point-particle formula, in units of a
EXCLUSION_RADIUS = 3.0
WARN_RADIUS = 10.0


@dataclass(frozen=True)
class Impedance:
    """Boundary impedance zeta = h / a^kappa with Re h >= 0, kappa in [0, 1)."""

    h: complex
    kappa: float

    def __post_init__(self):
        h = complex(self.h)
        object.__setattr__(self, "h", h)
        if h.real < 0:
            raise ValueError(f"impedance requires Re h >= 0, got h = {h}")
        if not 0.0 <= self.kappa < 1.0:
            raise ValueError(f"impedance exponent kappa must lie in [0, 1), got {self.kappa}")

    def zeta(self, a: float) -> complex:
        return self.h / a**self.kappa


def compute_Q(
    sm: ShapeMatrices,
    imp: Impedance,
    med: Medium,
    curl_e0_at_center: np.ndarray,
    a: float,
) -> np.ndarray:
    """Integrated surface-current pseudovector for one particle.

    curl_e0_at_center is the curl of the incident electric field at the
    particle center; a is the particle half-diameter (|S| = c_S a^2).
    """
    zeta = imp.zeta(a)
    area = sm.c_s * a**2
    return -(zeta * area / (1j * med.omega * med.mu0)) * (sm.xi @ np.asarray(curl_e0_at_center))


@dataclass(frozen=True)
class OneBodySolution:
    """One-particle solution: Q plus everything needed to evaluate fields."""

    Q: np.ndarray
    center: np.ndarray
    a: float
    medium: Medium
    shape_matrices: ShapeMatrices
    impedance: Impedance
    incident: PlaneWave


def solve_one_body(
    sm: ShapeMatrices,
    imp: Impedance,
    med: Medium,
    pw: PlaneWave,
    center=(0.0, 0.0, 0.0),
    a: float | None = None,
) -> OneBodySolution:
    """Solve the one-particle problem for a plane-wave incident field.

    a defaults to the half-diameter of the shape the matrices were built
    from; pass it explicitly when the shape was built at unit scale.
    """
    center = np.asarray(center, dtype=float)
    if a is None:
        if sm.shape is None:
            raise ValueError("particle size a is required when shape matrices carry no shape")
        a = sm.shape.half_diameter
    q = compute_Q(sm, imp, med, curl_incident(pw, med, center), a)
    return OneBodySolution(
        Q=q, center=center, a=a, medium=med, shape_matrices=sm, impedance=imp, incident=pw
    )


def _check_distance(sol: OneBodySolution, x):
    r = np.linalg.norm(np.asarray(x, dtype=float) - sol.center, axis=-1)
    if np.any(r < EXCLUSION_RADIUS * sol.a):
        raise ValueError(
            f"evaluation point within {EXCLUSION_RADIUS} a of the particle; "
            "the point-particle formula is invalid there"
        )
    if np.any(r < WARN_RADIUS * sol.a):
        warnings.warn(
            f"evaluation point closer than {WARN_RADIUS} a to the particle; "
            "expect O(a/d) relative error",
            stacklevel=3,
        )


def scattered_field(sol: OneBodySolution, med: Medium, x) -> np.ndarray:
    """Scattered part v_E(x) = grad g(x, O) x Q; total field is E0 + v_E."""
    _check_distance(sol, x)
    return np.cross(grad_green(x, sol.center, med.k), sol.Q)


def total_field(sol: OneBodySolution, med: Medium, x) -> np.ndarray:
    return incident_field(sol.incident, med, x) + scattered_field(sol, med, x)


def far_field(sol: OneBodySolution, med: Medium, x0, r: float) -> np.ndarray:
    """Leading-order scattered field at distance r in unit direction x0.

    Uses grad g ~ ik g x0, giving a field transverse to x0 by
    construction. Requires kr >= 10.
    """
    x0 = np.asarray(x0, dtype=float)
    if abs(np.linalg.norm(x0) - 1.0) > 1e-10:
        raise ValueError("far-field direction x0 must be a unit vector")
    kr = med.k * r
    if kr < 10.0:
        raise ValueError(f"far-field form requires kr >= 10, got kr = {kr:.3g}")
    zeta = sol.impedance.zeta(sol.a)
    area = sol.shape_matrices.c_s * sol.a**2
    amp = (
        -zeta
        * area
        * np.sqrt(med.epsilon0 / med.mu0)
        * np.exp(1j * kr)
        / (4.0 * np.pi * r)
    )
    curl_e0 = curl_incident(sol.incident, med, sol.center)
    return amp * np.cross(x0, sol.shape_matrices.xi @ curl_e0)


def magnetic_field(sol: OneBodySolution, med: Medium, x) -> np.ndarray:
    """H = curl E / (i omega mu0) from the closed-form total field.

    The curl of the scattered part grad g x Q is interaction_kernel . Q,
    so no numerical differentiation is involved.
    """
    _check_distance(sol, x)
    curl_e = curl_incident(sol.incident, med, x) + interaction_kernel(
        x, sol.center, med.k
    ) @ sol.Q
    return curl_e / (1j * med.omega * med.mu0)
