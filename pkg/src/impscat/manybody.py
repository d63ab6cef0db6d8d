"""Particle clouds, the many-body linear system, and effective fields.

With A_m the curl of the effective field at particle m, the coupled
system is

    A_j + (c_S / (i omega mu0)) a^(2-kappa) sum_{m != j}
          h(x_m) K(x_j, x_m) Xi A_m  =  (curl E0)(x_j),

a dense 3M x 3M complex system solved either by LU or by matrix-free
GMRES. Once the A_m are known the effective electric field anywhere away
from the particles is a direct sum over particles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import LinearOperator, gmres

from ._coupling import CouplingOperator
from .errors import SolverError
from .fields import Medium, PlaneWave, curl_incident, incident_field
from .geometry import ShapeMatrices

__all__ = [
    "Box",
    "ParticleCloud",
    "FieldSample",
    "LasSystem",
    "generate_cloud",
    "assemble_las",
    "solve_las",
    "effective_field",
    "write_cloud",
    "read_cloud",
]

MIN_SPACING_OVER_A = 4.0
EXCLUSION_RADIUS = 3.0
DENSE_LIMIT = 1500


@dataclass(frozen=True)
class Box:
    """Axis-aligned box [lo, hi]."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(3)
        hi = np.asarray(self.hi, dtype=float).reshape(3)
        if np.any(hi <= lo):
            raise ValueError(f"Box needs hi > lo per axis, got {lo} .. {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)


def _as_boxes(domain):
    if isinstance(domain, Box):
        return (domain,)
    boxes = tuple(domain)
    if not boxes or not all(isinstance(b, Box) for b in boxes):
        raise TypeError("domain must be a Box or a sequence of Box")
    return boxes


@dataclass(frozen=True)
class ParticleCloud:
    """Positions, per-particle impedance factors, and the shared shape."""

    domain: tuple
    a: float
    kappa: float
    positions: np.ndarray
    h_values: np.ndarray
    shape_matrices: ShapeMatrices | None = None
    spacing: float = 0.0
    seed: int = 0

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float).reshape(-1, 3)
        hv = np.asarray(self.h_values, dtype=complex).reshape(-1)
        if len(hv) != len(pos):
            raise ValueError("h_values must match positions")
        if np.any(hv.real < 0):
            raise ValueError("impedance factors require Re h >= 0")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "h_values", hv)
        object.__setattr__(self, "domain", _as_boxes(self.domain))

    def __len__(self):
        return len(self.positions)


def generate_cloud(
    domain,
    a: float,
    kappa: float,
    density,
    h,
    seed: int = 0,
    shape_matrices: ShapeMatrices | None = None,
    c_d: float = 1.0,
) -> ParticleCloud:
    """Place particles on a seeded lattice following the a^-(2-kappa) law.

    density is a constant or a callable N(x) >= 0; the expected count in
    any region is a^-(2-kappa) * integral of N. Placement is a cubic
    lattice with spacing c_d * a^((2-kappa)/3) * N^(-1/3); a spatially
    varying N keeps the lattice of the peak density and thins sites with
    probability N(x)/N_max. The seed fixes the lattice offset (and the
    thinning stream); output is deterministic given the seed.
    """
    boxes = _as_boxes(domain)
    if not 0.0 <= kappa < 1.0:
        raise ValueError(f"kappa must lie in [0, 1), got {kappa}")
    if a <= 0:
        raise ValueError("particle size a must be positive")
    n_fun = density if callable(density) else (lambda x, v=float(density): np.full(np.shape(x)[:-1], v))
    h_fun = h if callable(h) else (lambda x, v=complex(h): np.full(np.shape(x)[:-1], v, dtype=complex))

    # peak density over a probe grid decides the base lattice spacing
    n_max = 0.0
    expected = 0.0
    for box in boxes:
        g = np.stack(
            np.meshgrid(*(np.linspace(box.lo[i], box.hi[i], 9) for i in range(3)), indexing="ij"),
            axis=-1,
        ).reshape(-1, 3)
        n_probe = np.asarray(n_fun(g), dtype=float)
        if np.any(n_probe < 0):
            raise ValueError("density must be nonnegative")
        n_max = max(n_max, float(n_probe.max()))
        expected += a ** (-(2.0 - kappa)) * float(n_probe.mean()) * box.volume

    if n_max == 0.0:
        return ParticleCloud(boxes, a, kappa, np.empty((0, 3)), np.empty(0, dtype=complex),
                             shape_matrices, 0.0, seed)
    if expected < 1.0:
        raise ValueError(
            f"expected particle count {expected:.3g} < 1; increase density or decrease a"
        )

    spacing = c_d * a ** ((2.0 - kappa) / 3.0) * n_max ** (-1.0 / 3.0)
    if spacing < MIN_SPACING_OVER_A * a:
        raise ValueError(
            f"lattice spacing {spacing:.3g} < {MIN_SPACING_OVER_A} a; "
            "the asymptotic theory requires d >> a"
        )

    rng = np.random.default_rng(seed)
    offset = rng.uniform(0.0, spacing, size=3)
    probe_all = np.vstack([
        np.stack(np.meshgrid(*(np.linspace(b.lo[i], b.hi[i], 9) for i in range(3)),
                             indexing="ij"), axis=-1).reshape(-1, 3)
        for b in boxes
    ])
    uniform = float(np.ptp(np.asarray(n_fun(probe_all), dtype=float))) <= 1e-12 * n_max

    positions = []
    for box in boxes:
        lo_idx = np.ceil((box.lo - offset) / spacing).astype(int)
        hi_idx = np.floor((box.hi - offset) / spacing).astype(int)
        if np.any(hi_idx < lo_idx):
            continue
        axes = [offset[i] + spacing * np.arange(lo_idx[i], hi_idx[i] + 1) for i in range(3)]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)
        if not uniform:
            keep = rng.random(len(grid)) < np.asarray(n_fun(grid), dtype=float) / n_max
            grid = grid[keep]
        positions.append(grid)
    positions = np.vstack(positions) if positions else np.empty((0, 3))
    if len(positions) == 0:
        raise ValueError("lattice placement produced no particles; domain smaller than spacing")

    h_vals = np.asarray(h_fun(positions), dtype=complex)
    if np.any(h_vals.real < 0):
        raise ValueError("impedance function must satisfy Re h >= 0 everywhere")
    return ParticleCloud(boxes, a, kappa, positions, h_vals, shape_matrices, spacing, seed)


# ---------------------------------------------------------------------------
# linear system
# ---------------------------------------------------------------------------

@dataclass
class LasSystem:
    """Assembled many-body system (I + B) A = A0 in 3x3 block form."""

    cloud: ParticleCloud
    medium: Medium
    a0: np.ndarray
    operator: CouplingOperator

    @property
    def n_unknowns(self) -> int:
        return 3 * len(self.cloud)

    def block(self, j: int, m: int) -> np.ndarray:
        """Coefficient block (j, m): identity on the diagonal."""
        if j == m:
            return np.eye(3, dtype=complex)
        op = self.operator
        from .fields import interaction_kernel

        return op.strengths[m] * interaction_kernel(
            op.points[j], op.points[m], op.k
        ) @ op.xi

    def residual(self, a) -> float:
        r = self.operator.matvec(np.asarray(a).reshape(-1)) - self.a0.reshape(-1)
        return float(np.linalg.norm(r) / np.linalg.norm(self.a0))


def _coupling_strengths(cloud: ParticleCloud, med: Medium) -> np.ndarray:
    sm = cloud.shape_matrices
    if sm is None:
        raise ValueError("cloud carries no shape matrices; pass them to generate_cloud")
    pref = sm.c_s * cloud.a ** (2.0 - cloud.kappa) / (1j * med.omega * med.mu0)
    return pref * cloud.h_values


def assemble_las(cloud: ParticleCloud, med: Medium, incident: PlaneWave,
                 threads: int = 1) -> LasSystem:
    """Right-hand side and coupling operator for the cloud."""
    if len(cloud) == 0:
        raise ValueError("cannot assemble a system for an empty cloud")
    pos = cloud.positions
    uniq = np.unique(pos, axis=0)
    if len(uniq) != len(pos):
        raise ValueError("assembly error: overlapping particle positions")
    sm = cloud.shape_matrices
    op = CouplingOperator(pos, _coupling_strengths(cloud, med), sm.xi, med.k, threads=threads)
    a0 = curl_incident(incident, med, pos)
    return LasSystem(cloud=cloud, medium=med, a0=a0, operator=op)


def solve_las(
    sys: LasSystem,
    method: str = "direct",
    tol: float = 1e-10,
    dense_limit: int = DENSE_LIMIT,
    maxiter: int = 400,
    restart: int = 60,
    stats: dict | None = None,
) -> np.ndarray:
    """Solve for the curls A_m; returns an (M, 3) complex array.

    direct: LU with partial pivoting on the materialized matrix (memory
    grows as 9 M^2, use below ~dense_limit particles). iterative:
    matrix-free restarted GMRES on the same operator. Pass a dict as
    ``stats`` to receive the iteration count and final residual.
    """
    m = len(sys.cloud)
    b = sys.a0.reshape(-1)
    iterations = 0
    if method == "direct":
        if m > dense_limit:
            raise SolverError(
                f"direct solve refused for M = {m} > dense_limit = {dense_limit}; "
                "use method='iterative'"
            )
        mat = sys.operator.dense()
        try:
            x = np.linalg.solve(mat, b)
        except np.linalg.LinAlgError as exc:
            raise SolverError(f"singular many-body system: {exc}") from exc
    elif method == "iterative":
        op = LinearOperator(shape=sys.operator.shape, dtype=complex, matvec=sys.operator.matvec)
        iters = [0]

        def count(_):
            iters[0] += 1

        x, info = gmres(op, b, x0=b.copy(), rtol=tol, atol=0.0,
                        restart=restart, maxiter=maxiter, callback=count,
                        callback_type="pr_norm")
        iterations = iters[0]
        if info != 0:
            res = float(np.linalg.norm(sys.operator.matvec(x) - b) / np.linalg.norm(b))
            raise SolverError(
                f"GMRES did not converge in {iterations} iterations (info={info})",
                residual=res,
            )
    else:
        raise ValueError(f"unknown method {method!r}")
    res = float(np.linalg.norm(sys.operator.matvec(x) - b) / np.linalg.norm(b))
    if res > max(tol, 1e-9):
        raise SolverError(f"solution residual {res:.3e} exceeds tolerance", residual=res)
    if stats is not None:
        stats.update(method=method, iterations=iterations, residual=res)
    return x.reshape(m, 3)


# ---------------------------------------------------------------------------
# field evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FieldSample:
    """Field values at a batch of evaluation points."""

    position: np.ndarray
    E: np.ndarray
    H: np.ndarray | None = None


def effective_field(
    cloud: ParticleCloud,
    a_curls: np.ndarray,
    med: Medium,
    incident: PlaneWave,
    x,
    compute_h: bool = False,
    threads: int = 1,
) -> FieldSample:
    """Effective E (and optionally H) at points x away from all particles.

    Every evaluation point must be at least 3a from every particle; the
    sum runs over all particles (no excluded index away from the cloud).
    """
    pts = np.asarray(x, dtype=float).reshape(-1, 3)
    pos = cloud.positions
    if len(pos):
        d2min = np.min(
            ((pts[:, None, :] - pos[None, :, :]) ** 2).sum(-1), axis=1
        )
        if np.any(np.sqrt(d2min) < EXCLUSION_RADIUS * cloud.a):
            raise ValueError(
                f"evaluation point inside the {EXCLUSION_RADIUS} a exclusion ball of a particle"
            )
    e = incident_field(incident, med, pts)
    h = None
    if len(pos):
        op = CouplingOperator(pos, _coupling_strengths(cloud, med),
                              cloud.shape_matrices.xi, med.k, threads=threads)
        w = op._weighted(a_curls)
        e = e - op.cross_sum(pts, w)
        if compute_h:
            curl = curl_incident(incident, med, pts) - op.kernel_sum(pts, w)
            h = curl / (1j * med.omega * med.mu0)
    elif compute_h:
        h = curl_incident(incident, med, pts) / (1j * med.omega * med.mu0)
    return FieldSample(position=pts, E=e, H=h)


# ---------------------------------------------------------------------------
# columnar text serialization
# ---------------------------------------------------------------------------

def write_cloud(path, cloud: ParticleCloud):
    """Columnar text: index x y z Re_h Im_h, with metadata comments."""
    with open(path, "w") as fh:
        fh.write("# impscat-cloud v1: index x y z Re_h Im_h\n")
        fh.write(f"# a={cloud.a!r} kappa={cloud.kappa!r} spacing={cloud.spacing!r} seed={cloud.seed}\n")
        for i, (p, hv) in enumerate(zip(cloud.positions, cloud.h_values)):
            fh.write(
                f"{i} {p[0]:.17g} {p[1]:.17g} {p[2]:.17g} {hv.real:.17g} {hv.imag:.17g}\n"
            )


def read_cloud(path):
    """Read back positions, h values and metadata written by write_cloud."""
    meta = {}
    pos, hv = [], []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line.startswith("#"):
                for token in line[1:].split():
                    if "=" in token:
                        key, val = token.split("=", 1)
                        meta[key] = float(val)
                continue
            if not line:
                continue
            parts = line.split()
            pos.append([float(v) for v in parts[1:4]])
            hv.append(complex(float(parts[4]), float(parts[5])))
    return np.array(pos).reshape(-1, 3), np.array(hv, dtype=complex), meta
