"""Limiting effective-field equation and refraction-coefficient shift.

As the particle size tends to zero with the a^-(2-kappa) distribution
law, the discrete many-body sums converge to the integral equation

    E(x) = E0(x) - (c_S / (i omega mu0))
           curl int_Omega g(x, y) Xi (curl E)(y) N(y) h(y) dy.

Collocation on a cube partition of Omega (excluding the self cube)
yields the same block structure as the many-body system with strengths
h(x_p) N(x_p) |cube|. For constant N h and scalar Xi = xi I the extra
term amounts to replacing k^2 by k1^2 = k^2 / (1 + c2) with
c2 = xi c_S N h / (i omega mu0): the embedded particles shift the
refraction coefficient and, for Re h > 0, make the medium absorptive.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from ._coupling import CouplingOperator
from .errors import SolverError
from .fields import Medium, PlaneWave, curl_incident, incident_field
from .geometry import ShapeMatrices
from .manybody import Box

__all__ = [
    "CubeGrid",
    "MediumSolution",
    "HomogenizedMedium",
    "solve_limit_equation",
    "evaluate_limit_field",
    "refraction_shift",
    "dispersion_check",
]

DENSE_LIMIT_CELLS = 1200


@dataclass(frozen=True)
class CubeGrid:
    """Partition of a box domain into equal cells with per-cell N and h."""

    box: Box
    dims: tuple
    centers: np.ndarray
    cell: np.ndarray
    n_values: np.ndarray
    h_values: np.ndarray

    @classmethod
    def build(cls, box: Box, n, density, h) -> "CubeGrid":
        """Partition ``box`` into n (or (n1,n2,n3)) cells per axis."""
        dims = (n, n, n) if np.isscalar(n) else tuple(int(v) for v in n)
        if any(v < 1 for v in dims):
            raise ValueError("grid needs at least one cell per axis")
        cell = (box.hi - box.lo) / np.asarray(dims, dtype=float)
        axes = [box.lo[i] + cell[i] * (np.arange(dims[i]) + 0.5) for i in range(3)]
        centers = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        n_fun = density if callable(density) else (lambda x, v=float(density): np.full(len(x), v))
        h_fun = h if callable(h) else (lambda x, v=complex(h): np.full(len(x), v, dtype=complex))
        n_vals = np.asarray(n_fun(centers), dtype=float)
        h_vals = np.asarray(h_fun(centers), dtype=complex)
        if np.any(n_vals < 0):
            raise ValueError("density must be nonnegative")
        if np.any(h_vals.real < 0):
            raise ValueError("impedance function must satisfy Re h >= 0")
        return cls(box=box, dims=dims, centers=centers, cell=cell,
                   n_values=n_vals, h_values=h_vals)

    @property
    def n_cells(self) -> int:
        return len(self.centers)

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.cell))

    @property
    def ell(self) -> float:
        """Largest cell side (the partition scale)."""
        return float(self.cell.max())


@dataclass(frozen=True)
class MediumSolution:
    """Collocation solution of the limiting equation on a cube grid."""

    grid: CubeGrid
    E: np.ndarray
    A: np.ndarray
    residual: float
    iterations: int


def _grid_operator(grid: CubeGrid, med: Medium, sm: ShapeMatrices, threads=1):
    pref = sm.c_s / (1j * med.omega * med.mu0)
    strengths = pref * grid.h_values * grid.n_values * grid.cell_volume
    return CouplingOperator(grid.centers, strengths, sm.xi, med.k, threads=threads)


def solve_limit_equation(
    grid: CubeGrid,
    med: Medium,
    incident: PlaneWave,
    sm: ShapeMatrices,
    tol: float = 1e-10,
    method: str = "auto",
    threads: int = 1,
) -> MediumSolution:
    """Solve the discretized limiting equation for E and A = curl E.

    The collocation system is closed in A by applying the curl to the
    field equation (the same interaction kernel as the many-body system);
    E is then reconstructed from A. Self-cube terms are excluded.
    """
    if grid.n_cells < 2:
        raise ValueError("degenerate grid: need at least 2 cells")
    op = _grid_operator(grid, med, sm, threads=threads)
    b = curl_incident(incident, med, grid.centers).reshape(-1)
    if method == "auto":
        method = "direct" if grid.n_cells <= DENSE_LIMIT_CELLS else "iterative"
    iterations = 0
    if method == "direct":
        a = np.linalg.solve(op.dense(), b)
    elif method == "iterative":
        lin = LinearOperator(shape=op.shape, dtype=complex, matvec=op.matvec)
        iters = [0]
        a, info = gmres(lin, b, x0=b.copy(), rtol=tol, atol=0.0, restart=60,
                        maxiter=400, callback=lambda _: iters.__setitem__(0, iters[0] + 1),
                        callback_type="pr_norm")
        iterations = iters[0]
        if info != 0:
            res = float(np.linalg.norm(op.matvec(a) - b) / np.linalg.norm(b))
            raise SolverError(f"limit-equation GMRES failed (info={info})", residual=res)
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(np.linalg.norm(op.matvec(a) - b) / np.linalg.norm(b))
    if res > max(tol, 1e-9):
        raise SolverError(f"limit-equation residual {res:.3e} exceeds tolerance", residual=res)
    a = a.reshape(-1, 3)
    # reconstruct E at the centers, excluding the singular self cube
    w = op._weighted(a)
    e = incident_field(incident, med, grid.centers) - op.cross_sum(
        grid.centers, w, exclude_self=True
    )
    return MediumSolution(grid=grid, E=e, A=a, residual=res, iterations=iterations)


def evaluate_limit_field(
    sol: MediumSolution, med: Medium, incident: PlaneWave, sm: ShapeMatrices, x
) -> np.ndarray:
    """Reconstructed effective field at arbitrary points off the centers."""
    pts = np.asarray(x, dtype=float).reshape(-1, 3)
    op = _grid_operator(sol.grid, med, sm)
    d2 = ((pts[:, None, :] - sol.grid.centers[None, :, :]) ** 2).sum(-1)
    if np.any(np.sqrt(d2) < 1e-9 * sol.grid.ell):
        raise ValueError("evaluation points must not coincide with cube centers")
    return incident_field(incident, med, pts) - op.cross_sum(pts, op._weighted(sol.A))


# ---------------------------------------------------------------------------
# homogenized medium
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class HomogenizedMedium:
    """Refraction shift produced by a uniform particle distribution."""

    c1: complex
    c2: complex
    k_squared: float
    k1_squared: complex
    xi_scalar: float


def refraction_shift(sm: ShapeMatrices, med: Medium, n_density: float, h: complex) -> HomogenizedMedium:
    """k1^2 = k^2 / (1 + c2) for constant N h and scalar Xi = xi I.

    Requires a shape whose xi matrix is a scalar multiple of the identity
    (spheres); raises otherwise. Re h >= 0 implies Im k1^2 >= 0 (strict
    when Re h > 0): the homogenized medium is absorptive.
    """
    if n_density < 0:
        raise ValueError("number density must be nonnegative")
    h = complex(h)
    if h.real < 0:
        raise ValueError("refraction shift requires Re h >= 0")
    xi = sm.xi_scalar
    c1 = sm.c_s * n_density * h / (1j * med.omega * med.mu0)
    c2 = c1 * xi
    denom = 1.0 + c2
    if abs(denom) < 1e-14:
        raise ValueError("1 + c2 vanishes; homogenized wavenumber undefined")
    k2 = med.k**2
    return HomogenizedMedium(c1=c1, c2=c2, k_squared=k2, k1_squared=k2 / denom, xi_scalar=xi)


def _curl_grid(f, cell):
    """Central-difference curl of a vector grid field (n1, n2, n3, 3)."""
    df = [np.gradient(f[..., j], cell[0], cell[1], cell[2], axis=(0, 1, 2)) for j in range(3)]
    # df[j][i] = d f_j / d x_i
    return np.stack(
        [
            df[2][1] - df[1][2],
            df[0][2] - df[2][0],
            df[1][0] - df[0][1],
        ],
        axis=-1,
    )


def dispersion_check(hom: HomogenizedMedium, sol: MediumSolution) -> dict:
    """Finite-difference residual of the homogenized wave equation.

    Checks (1 + c2) curl curl E = k^2 E at interior grid points and the
    algebraic identity k1^2 (1 + c2) = k^2. Purely diagnostic.
    """
    grid = sol.grid
    n1, n2, n3 = grid.dims
    f = sol.E.reshape(n1, n2, n3, 3)
    cc = _curl_grid(_curl_grid(f, grid.cell), grid.cell)
    resid = (1.0 + hom.c2) * cc - hom.k_squared * f
    interior = (slice(2, -2),) * 3
    if min(grid.dims) < 6:
        raise ValueError("dispersion check needs at least 6 cells per axis")
    rnorm = float(np.linalg.norm(resid[interior]))
    fnorm = float(np.linalg.norm(hom.k_squared * f[interior]))
    return {
        "residual_norm": rnorm,
        "field_norm": fnorm,
        "relative_residual": rnorm / fnorm if fnorm > 0 else 0.0,
        "identity_error": abs(hom.k1_squared * (1.0 + hom.c2) - hom.k_squared),
        "ell": grid.ell,
    }
