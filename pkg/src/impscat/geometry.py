"""Particle shapes, surface quadrature, and shape-matrix assembly.

The geometric fingerprint of a particle enters the scattering formulas
through a small set of surface integrals:

    b     = |S|^-1 int_S N N^T ds          (normal second moment)
    tau   = I - b
    beta  = averaged static-kernel moment, see ``compute_beta``
    alpha = (I + beta)^-1 - I
    xi    = (I + alpha) tau

together with the surface area |S| and the dimensionless constant
c_S = |S| / a^2, where a is the half-diameter of the particle. All of
b, beta, xi, c_S are invariant under uniform scaling of the shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Sphere",
    "Ellipsoid",
    "TriMesh",
    "SurfaceQuadrature",
    "ShapeMatrices",
    "build_quadrature",
    "rotate_quadrature",
    "compute_b",
    "compute_beta",
    "beta_samples",
    "surface_samples",
    "compute_shape_matrices",
    "load_trimesh",
    "save_trimesh",
]

DEFAULT_ORDER = 64
DEFAULT_T_SAMPLES = 6


# ---------------------------------------------------------------------------
# shapes
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Sphere:
    """Sphere of the given radius centered at the origin."""

    radius: float

    def __post_init__(self):
        if not (self.radius > 0 and np.isfinite(self.radius)):
            raise ValueError(f"Sphere radius must be positive, got {self.radius!r}")

    @property
    def half_diameter(self) -> float:
        return self.radius


@dataclass(frozen=True)
class Ellipsoid:
    """Axis-aligned ellipsoid x^2/a1^2 + y^2/a2^2 + z^2/a3^2 = 1."""

    semi_axes: tuple

    def __post_init__(self):
        ax = tuple(float(v) for v in self.semi_axes)
        if len(ax) != 3 or any(not (v > 0 and np.isfinite(v)) for v in ax):
            raise ValueError(f"Ellipsoid needs three positive semi-axes, got {self.semi_axes!r}")
        object.__setattr__(self, "semi_axes", ax)

    @property
    def half_diameter(self) -> float:
        return max(self.semi_axes)


@dataclass(frozen=True)
class TriMesh:
    """Closed, outward-oriented triangle mesh (vertices, faces)."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) < 4:
            raise ValueError("TriMesh vertices must be an (n, 3) array with n >= 4")
        if f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("TriMesh faces must be an (m, 3) integer array")
        if f.min() < 0 or f.max() >= len(v):
            raise ValueError("TriMesh face indices out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        self._check_closed()
        if self.signed_volume() <= 0:
            raise ValueError("TriMesh must be outward-oriented (signed volume > 0)")

    def _check_closed(self):
        edges = set()
        for a, b, c in self.faces:
            for e in ((a, b), (b, c), (c, a)):
                if e in edges:
                    raise ValueError("TriMesh has a repeated directed edge (inconsistent orientation)")
                edges.add(e)
        for a, b in edges:
            if (b, a) not in edges:
                raise ValueError("TriMesh is not closed (unmatched edge)")

    def signed_volume(self) -> float:
        v = self.vertices[self.faces]
        return float(np.einsum("fi,fi->", v[:, 0], np.cross(v[:, 1], v[:, 2]))) / 6.0

    @property
    def half_diameter(self) -> float:
        v = self.vertices
        d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(-1)
        return 0.5 * float(np.sqrt(d2.max()))


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SurfaceQuadrature:
    """Nodes, positive weights summing to |S|, and unit outward normals."""

    nodes: np.ndarray
    weights: np.ndarray
    normals: np.ndarray
    shape: object = None
    order: int = 0

    @property
    def area(self) -> float:
        return float(self.weights.sum())


def _gauss_theta(n):
    # Gauss-Legendre on theta in (0, pi); sin(theta) stays in the integrand,
    # which keeps the pole-frame kernel integrands smooth in theta
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * np.pi * (x + 1.0), 0.5 * np.pi * w


def _rotation_to(zhat):
    """Rotation matrix mapping e3 to the unit vector zhat (Rodrigues)."""
    z = np.array([0.0, 0.0, 1.0])
    zhat = np.asarray(zhat, dtype=float)
    zhat = zhat / np.linalg.norm(zhat)
    v = np.cross(z, zhat)
    c = z @ zhat
    if np.linalg.norm(v) < 1e-14:
        return np.eye(3) if c > 0 else np.diag([1.0, -1.0, -1.0])
    vx = np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])
    return np.eye(3) + vx + vx @ vx / (1.0 + c)


def _ellipsoid_grid(semi_axes, n_theta, n_phi, pole=None):
    """Parametric product grid on an ellipsoid (sphere: equal axes).

    The underlying unit-sphere grid is rotated so its coordinate pole maps
    to the direction ``pole`` before being stretched by the semi-axes.
    Returns (nodes, weights, normals).
    """
    ax = np.asarray(semi_axes, dtype=float)
    theta, wt = _gauss_theta(n_theta)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    wphi = 2.0 * np.pi / n_phi
    st, ct = np.sin(theta), np.cos(theta)
    u = np.empty((n_theta, n_phi, 3))
    u[..., 0] = st[:, None] * np.cos(phi)[None, :]
    u[..., 1] = st[:, None] * np.sin(phi)[None, :]
    u[..., 2] = ct[:, None]
    u = u.reshape(-1, 3)
    if pole is not None:
        u = u @ _rotation_to(pole).T
    nodes = u * ax
    # surface element |r_theta x r_phi| = det(A) sin(theta) |A^-1 u|
    ainv_u = u / ax
    nrm = np.linalg.norm(ainv_u, axis=1)
    normals = ainv_u / nrm[:, None]
    w = (st * wt)[:, None] * wphi * np.ones(n_phi)[None, :]
    weights = w.reshape(-1) * ax.prod() * nrm
    return nodes, weights, normals


# degree-5 symmetric triangle rule (7 points, barycentric)
_TRI7_BARY = np.array(
    [
        [1 / 3, 1 / 3, 1 / 3],
        [(6 + np.sqrt(15)) / 21, (6 + np.sqrt(15)) / 21, (9 - 2 * np.sqrt(15)) / 21],
        [(6 + np.sqrt(15)) / 21, (9 - 2 * np.sqrt(15)) / 21, (6 + np.sqrt(15)) / 21],
        [(9 - 2 * np.sqrt(15)) / 21, (6 + np.sqrt(15)) / 21, (6 + np.sqrt(15)) / 21],
        [(6 - np.sqrt(15)) / 21, (6 - np.sqrt(15)) / 21, (9 + 2 * np.sqrt(15)) / 21],
        [(6 - np.sqrt(15)) / 21, (9 + 2 * np.sqrt(15)) / 21, (6 - np.sqrt(15)) / 21],
        [(9 + 2 * np.sqrt(15)) / 21, (6 - np.sqrt(15)) / 21, (6 - np.sqrt(15)) / 21],
    ]
)
_TRI7_W = np.array(
    [9 / 40]
    + [(155 + np.sqrt(15)) / 1200] * 3
    + [(155 - np.sqrt(15)) / 1200] * 3
)


def _mesh_face_geometry(mesh: TriMesh):
    v = mesh.vertices[mesh.faces]
    cr = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    areas = 0.5 * np.linalg.norm(cr, axis=1)
    if np.any(areas <= 1e-14 * mesh.half_diameter ** 2):
        raise ValueError("degenerate mesh: zero-area triangle")
    normals = cr / (2.0 * areas)[:, None]
    return v, areas, normals


def build_quadrature(shape, order: int = DEFAULT_ORDER) -> SurfaceQuadrature:
    """Surface quadrature for a particle shape.

    Sphere and ellipsoid use a Gauss-Legendre (theta) x trapezoid (phi)
    product grid with order x 2*order nodes. Triangle meshes use a
    degree-5 7-point rule per face; ``order`` is accepted for interface
    uniformity but does not change the per-face rule.
    """
    if order < 1:
        raise ValueError("quadrature order must be >= 1")
    if isinstance(shape, Sphere):
        ax = (shape.radius,) * 3
        nodes, weights, normals = _ellipsoid_grid(ax, order, 2 * order)
    elif isinstance(shape, Ellipsoid):
        nodes, weights, normals = _ellipsoid_grid(shape.semi_axes, order, 2 * order)
    elif isinstance(shape, TriMesh):
        v, areas, fnormals = _mesh_face_geometry(shape)
        nodes = np.einsum("qb,fbi->fqi", _TRI7_BARY, v).reshape(-1, 3)
        weights = (areas[:, None] * _TRI7_W[None, :]).reshape(-1)
        normals = np.repeat(fnormals, len(_TRI7_W), axis=0)
    else:
        raise TypeError(f"unsupported shape {type(shape).__name__}")
    return SurfaceQuadrature(nodes, weights, normals, shape=shape, order=order)


def rotate_quadrature(q: SurfaceQuadrature, rot) -> SurfaceQuadrature:
    """Rigidly rotate a quadrature (nodes and normals) by a rotation matrix."""
    rot = np.asarray(rot, dtype=float)
    return SurfaceQuadrature(
        q.nodes @ rot.T, q.weights.copy(), q.normals @ rot.T, shape=None, order=q.order
    )


# ---------------------------------------------------------------------------
# shape matrices
# ---------------------------------------------------------------------------

def compute_b(q: SurfaceQuadrature) -> np.ndarray:
    """Surface-averaged outer product of normals, b = |S|^-1 sum w N N^T."""
    return np.einsum("i,im,ij->mj", q.weights, q.normals, q.normals) / q.weights.sum()


def _static_moment(nodes, weights, normals, t):
    # sum_i w_i (s_i - t) N(s_i)^T / (4 pi |s_i - t|^3); gradient of the
    # static kernel taken at the evaluation point t
    d = nodes - t
    r = np.linalg.norm(d, axis=1)
    if np.any(r < 1e-300):
        raise ValueError("desingularization failure: t coincides with a quadrature node")
    ker = d / (4.0 * np.pi * r[:, None] ** 3)
    return np.einsum("i,im,ij->mj", weights, ker, normals)


def _beta_sphere(shape: Sphere, order, t):
    that = np.asarray(t, dtype=float)
    if abs(np.linalg.norm(that) - shape.radius) > 1e-8 * shape.radius:
        raise ValueError("beta sample point is not on the sphere surface")
    nodes, weights, normals = _ellipsoid_grid((shape.radius,) * 3, order, 2 * order, pole=that)
    return _static_moment(nodes, weights, normals, shape.radius * that / np.linalg.norm(that))


def _beta_ellipsoid(shape: Ellipsoid, order, t):
    ax = np.asarray(shape.semi_axes)
    u = np.asarray(t, dtype=float) / ax
    if abs(np.linalg.norm(u) - 1.0) > 1e-8:
        raise ValueError("beta sample point is not on the ellipsoid surface")
    u = u / np.linalg.norm(u)
    nodes, weights, normals = _ellipsoid_grid(ax, order, 2 * order, pole=u)
    return _static_moment(nodes, weights, normals, u * ax)


def _locate_face(mesh: TriMesh, t):
    v, areas, normals = _mesh_face_geometry(mesh)
    scale = mesh.half_diameter
    t = np.asarray(t, dtype=float)
    offp = np.abs(np.einsum("fi,fi->f", normals, t[None, :] - v[:, 0]))
    for f in np.argsort(offp):
        if offp[f] > 1e-8 * scale:
            break
        # barycentric membership test in the face plane
        a, b, c = v[f]
        n = normals[f]
        w = np.array(
            [
                n @ np.cross(b - t, c - t),
                n @ np.cross(c - t, a - t),
                n @ np.cross(a - t, b - t),
            ]
        ) / (2.0 * areas[f])
        if np.all(w > 1e-9):
            return int(f)
    raise ValueError("beta sample point does not lie strictly inside a mesh face")


def _face_pv_term(tri, t):
    """PV integral of (s-t)/(4 pi |s-t|^3) over the flat face containing t.

    In polar coordinates around t the radial integral is logarithmic and
    the divergent part cancels over the full angle, leaving
    (1/4pi) int rho_hat(phi) log R(phi) dphi with R the distance from t
    to the face boundary along phi. Evaluated per vertex sector with
    Gauss-Legendre in the angle.
    """
    a, b, c = tri
    n = np.cross(b - a, c - a)
    n = n / np.linalg.norm(n)
    e1 = b - a
    e1 = e1 - (e1 @ n) * n
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    verts2 = np.array([[(p - t) @ e1, (p - t) @ e2] for p in (a, b, c)])
    angles = np.arctan2(verts2[:, 1], verts2[:, 0])
    idx = np.argsort(angles)
    verts2 = verts2[idx]
    angles = angles[idx]
    gl_x, gl_w = np.polynomial.legendre.leggauss(24)
    total = np.zeros(2)
    for i in range(3):
        p, qq = verts2[i], verts2[(i + 1) % 3]
        a0, a1 = angles[i], angles[(i + 1) % 3]
        if i == 2:
            a1 += 2.0 * np.pi
        phi = 0.5 * (a1 - a0) * (gl_x + 1.0) + a0
        wphi = 0.5 * (a1 - a0) * gl_w
        u = np.stack([np.cos(phi), np.sin(phi)], axis=1)
        # ray t + R u hits the segment p-q:  R = (p x (q-p)) / (u x (q-p))
        dq = qq - p
        denom = u[:, 0] * dq[1] - u[:, 1] * dq[0]
        rr = (p[0] * dq[1] - p[1] * dq[0]) / denom
        total += (wphi * np.log(rr)) @ u
    return (total[0] * e1 + total[1] * e2) / (4.0 * np.pi)


def _beta_mesh(mesh: TriMesh, t):
    v, areas, fnormals = _mesh_face_geometry(mesh)
    f_self = _locate_face(mesh, t)
    keep = np.arange(len(areas)) != f_self
    nodes = np.einsum("qb,fbi->fqi", _TRI7_BARY, v[keep]).reshape(-1, 3)
    weights = (areas[keep, None] * _TRI7_W[None, :]).reshape(-1)
    normals = np.repeat(fnormals[keep], len(_TRI7_W), axis=0)
    beta = _static_moment(nodes, weights, normals, np.asarray(t, dtype=float))
    pv = _face_pv_term(v[f_self], np.asarray(t, dtype=float))
    return beta + np.outer(pv, fnormals[f_self])


def beta_samples(q: SurfaceQuadrature, t_samples) -> np.ndarray:
    """Static-kernel moment matrix evaluated at each surface sample point.

    The integrand is the gradient of 1/(4 pi |s - t|) with respect to the
    evaluation point t, integrated against the outward normal:

        beta(t)_mj = int_S (s - t)_m N_j(s) / (4 pi |s - t|^3) ds.

    For spheres and ellipsoids each sample is integrated on a grid whose
    coordinate pole is aligned with t, which resolves the weak singularity
    to near machine precision (the exact identity trace beta(t) = 1/2
    holds for any closed surface and any on-surface t). Meshes combine the
    per-face rule away from t with a semi-analytic principal-value term on
    the face containing t; accuracy there is diagnostic grade.
    """
    shape = q.shape
    out = []
    for t in np.atleast_2d(np.asarray(t_samples, dtype=float)):
        if isinstance(shape, Sphere):
            out.append(_beta_sphere(shape, q.order, t))
        elif isinstance(shape, Ellipsoid):
            out.append(_beta_ellipsoid(shape, q.order, t))
        elif isinstance(shape, TriMesh):
            out.append(_beta_mesh(shape, t))
        else:
            out.append(_static_moment(q.nodes, q.weights, q.normals, t))
    return np.array(out)


def compute_beta(q: SurfaceQuadrature, t_samples) -> np.ndarray:
    """Average of ``beta_samples`` over the given surface points.

    The single-point matrix depends on where on the surface it is
    evaluated (for a sphere its eigenvalues are {1/3, 1/3, -1/6} with the
    -1/6 axis along t); the quantity entering the scattering formulas is
    the average over quasi-uniform samples, which for a sphere equals
    (1/6) I exactly.
    """
    return beta_samples(q, t_samples).mean(axis=0)


def surface_samples(shape, n: int = DEFAULT_T_SAMPLES) -> np.ndarray:
    """Quasi-uniform points on the surface for beta averaging.

    n = 6 uses the axis directions (exact second-moment isotropy); other n
    use a Fibonacci sphere. Meshes pick spread-out face centroids.
    """
    if isinstance(shape, TriMesh):
        v, areas, _ = _mesh_face_geometry(shape)
        cents = v.mean(axis=1)
        chosen = [int(np.argmax(areas))]
        while len(chosen) < min(n, len(cents)):
            d2 = ((cents[:, None, :] - cents[chosen][None, :, :]) ** 2).sum(-1).min(axis=1)
            chosen.append(int(np.argmax(d2)))
        return cents[chosen]
    if n == 6:
        dirs = np.vstack([np.eye(3), -np.eye(3)])
    else:
        i = np.arange(n)
        ga = np.pi * (3.0 - np.sqrt(5.0))
        z = 1.0 - (2.0 * i + 1.0) / n
        rho = np.sqrt(1.0 - z * z)
        dirs = np.stack([rho * np.cos(ga * i), rho * np.sin(ga * i), z], axis=1)
    if isinstance(shape, Sphere):
        return shape.radius * dirs
    if isinstance(shape, Ellipsoid):
        return dirs * np.asarray(shape.semi_axes)
    raise TypeError(f"unsupported shape {type(shape).__name__}")


@dataclass(frozen=True)
class ShapeMatrices:
    """Geometry-only matrices and constants for one particle shape."""

    b: np.ndarray
    tau: np.ndarray
    beta: np.ndarray
    alpha: np.ndarray
    xi: np.ndarray
    surface_area: float
    c_s: float
    beta_spread: float = 0.0
    shape: object = None

    @property
    def xi_scalar(self) -> float:
        """Scalar xi for isotropic shapes; raises if xi is not a multiple of I."""
        diag = np.diag(self.xi)
        off = self.xi - np.diag(diag)
        mean = diag.mean()
        dev = max(np.abs(off).max(), np.abs(diag - mean).max())
        if dev > 1e-8 * max(abs(mean), 1.0):
            raise ValueError("xi is not a scalar multiple of the identity for this shape")
        return float(mean)


def compute_shape_matrices(
    shape, order: int = DEFAULT_ORDER, n_t_samples: int = DEFAULT_T_SAMPLES
) -> ShapeMatrices:
    """Assemble b, tau, beta, alpha, xi, |S| and c_S for a shape.

    Raises if (I + beta) is numerically singular, which puts the shape
    outside the validity of the small-particle expansion.
    """
    q = build_quadrature(shape, order)
    b = compute_b(q)
    tau = np.eye(3) - b
    samples = beta_samples(q, surface_samples(shape, n_t_samples))
    beta = samples.mean(axis=0)
    spread = float(np.abs(samples - beta).max()) if len(samples) else 0.0
    m = np.eye(3) + beta
    if np.linalg.cond(m) > 1e12:
        raise ValueError("I + beta is numerically singular: shape outside the theory's validity")
    alpha = np.linalg.inv(m) - np.eye(3)
    xi = (np.eye(3) + alpha) @ tau
    area = q.area
    a = shape.half_diameter
    return ShapeMatrices(
        b=b,
        tau=tau,
        beta=beta,
        alpha=alpha,
        xi=xi,
        surface_area=area,
        c_s=area / a**2,
        beta_spread=spread,
        shape=shape,
    )


# ---------------------------------------------------------------------------
# mesh file I/O (ASCII OFF: vertex list + face index list)
# ---------------------------------------------------------------------------

def load_trimesh(path) -> TriMesh:
    """Read a triangle mesh from an ASCII OFF file."""
    tokens = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                tokens.extend(line.split())
    if not tokens or tokens[0].upper() != "OFF":
        raise ValueError(f"{path}: not an OFF file")
    nv, nf = int(tokens[1]), int(tokens[2])
    pos = 4  # skip edge count
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    faces = []
    for _ in range(nf):
        cnt = int(tokens[pos])
        if cnt != 3:
            raise ValueError(f"{path}: only triangle faces are supported")
        faces.append([int(t) for t in tokens[pos + 1 : pos + 4]])
        pos += 4
    return TriMesh(verts, np.array(faces, dtype=np.int64))


def save_trimesh(path, mesh: TriMesh):
    """Write a triangle mesh to an ASCII OFF file."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("OFF\n")
        fh.write(f"{len(mesh.vertices)} {len(mesh.faces)} 0\n")
        for v in mesh.vertices:
            fh.write(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}\n")
        for f in mesh.faces:
            fh.write(f"3 {f[0]} {f[1]} {f[2]}\n")
