"""Block-coupled linear operator shared by the many-body and limit solvers.

Both solvers reduce to the same 3n-unknown system

    A_q + sum_{p != q} s_p K(x_q, x_p) Xi A_p = A0_q

with K the curl-curl interaction kernel and s_p complex per-source
strengths. This module provides the dense assembly, a chunked
matrix-free matvec, and the field-evaluation sums. Chunks are a fixed
size and written to disjoint output slices, so results are bit-identical
for any worker-thread count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ._kernels import cross_sum_nb, kernel_sum_nb, set_threads

CHUNK = 64


def _kernel_pieces(xs, ys, k, exclude_offset=None):
    """Scalar kernel factors for all (x_chunk, y) pairs.

    Returns (a1, a2_over_rw_input..., rh, mask) pieces so that
        K(x,y) w = a1 w + a2 (rh . w) rh
    with a1 = k^2 g + g'/r and a2 = g'' - g'/r.
    """
    d = xs[:, None, :] - ys[None, :, :]
    r2 = np.einsum("cni,cni->cn", d, d)
    mask = None
    if exclude_offset is not None:
        c, n = r2.shape
        mask = np.arange(exclude_offset, exclude_offset + c)[:, None] == np.arange(n)[None, :]
        r2 = np.where(mask, 1.0, r2)
    if np.any(r2 <= 0.0):
        raise ValueError("coincident points in coupled system")
    r = np.sqrt(r2)
    invr = 1.0 / r
    g = np.exp(1j * k * r) * invr / (4.0 * np.pi)
    gp = g * (1j * k - invr)
    gpp = g * (-(k * k) - 2j * k * invr + 2.0 * invr * invr)
    a1 = (k * k) * g + gp * invr
    a2 = gpp - gp * invr
    rh = d * invr[:, :, None]
    if mask is not None:
        a1 = np.where(mask, 0.0, a1)
        a2 = np.where(mask, 0.0, a2)
        gp = np.where(mask, 0.0, gp)
    return a1, a2, gp, rh


class CouplingOperator:
    """Matrix-free I + B with blocks B[q,p] = s_p K(x_q, x_p) Xi, p != q."""

    dtype = np.complex128

    def __init__(self, points, strengths, xi, k, threads: int = 1):
        self.points = np.ascontiguousarray(points, dtype=float)
        self.strengths = np.asarray(strengths, dtype=complex)
        self.xi = np.asarray(xi, dtype=float)
        self.k = float(k)
        self.threads = max(1, int(threads))
        self.n = len(self.points)
        if len(self.strengths) != self.n:
            raise ValueError("strengths and points length mismatch")

    @property
    def shape(self):
        return (3 * self.n, 3 * self.n)

    def _weighted(self, a):
        # w_p = s_p Xi A_p
        return self.strengths[:, None] * (np.asarray(a).reshape(self.n, 3) @ self.xi.T)

    def _map_chunks(self, worker, n_rows):
        starts = list(range(0, n_rows, CHUNK))
        if self.threads == 1 or len(starts) == 1:
            for s in starts:
                worker(s)
        else:
            with ThreadPoolExecutor(max_workers=self.threads) as ex:
                list(ex.map(worker, starts))

    def kernel_sum(self, xs, w, exclude_self: bool = False):
        """sum_p K(x, y_p) w_p for each row x of xs."""
        xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, 3))
        out = np.zeros((len(xs), 3), dtype=complex)
        w = np.ascontiguousarray(w, dtype=complex)
        if kernel_sum_nb is not None:
            set_threads(self.threads)
            kernel_sum_nb(xs, self.points, w, self.k, 0 if exclude_self else -1, out)
            return out

        def worker(s):
            e = min(s + CHUNK, len(xs))
            a1, a2, _, rh = _kernel_pieces(
                xs[s:e], self.points, self.k, exclude_offset=s if exclude_self else None
            )
            rw = np.einsum("cni,ni->cn", rh, w)
            out[s:e] = np.einsum("cn,nj->cj", a1, w) + np.einsum(
                "cn,cn,cnj->cj", a2, rw, rh
            )

        self._map_chunks(worker, len(xs))
        return out

    def cross_sum(self, xs, w, exclude_self: bool = False):
        """sum_p grad g(x, y_p) x w_p for each row x of xs."""
        xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, 3))
        out = np.zeros((len(xs), 3), dtype=complex)
        w = np.ascontiguousarray(w, dtype=complex)
        if cross_sum_nb is not None:
            set_threads(self.threads)
            cross_sum_nb(xs, self.points, w, self.k, 0 if exclude_self else -1, out)
            return out

        def worker(s):
            e = min(s + CHUNK, len(xs))
            _, _, gp, rh = _kernel_pieces(
                xs[s:e], self.points, self.k, exclude_offset=s if exclude_self else None
            )
            cr = np.cross(rh, w[None, :, :])
            out[s:e] = np.einsum("cn,cnj->cj", gp, cr)

        self._map_chunks(worker, len(xs))
        return out

    def matvec(self, v):
        a = np.asarray(v, dtype=complex).reshape(self.n, 3)
        y = a + self.kernel_sum(self.points, self._weighted(a), exclude_self=True)
        return y.reshape(v.shape)

    def dense(self):
        """Materialize I + B as a (3n, 3n) array."""
        n = self.n
        d = self.points[:, None, :] - self.points[None, :, :]
        r2 = np.einsum("qpi,qpi->qp", d, d)
        eye_mask = np.eye(n, dtype=bool)
        r2[eye_mask] = 1.0
        if np.any(r2 <= 0.0):
            raise ValueError("coincident points in coupled system")
        r = np.sqrt(r2)
        invr = 1.0 / r
        g = np.exp(1j * self.k * r) * invr / (4.0 * np.pi)
        gp = g * (1j * self.k - invr)
        gpp = g * (-(self.k ** 2) - 2j * self.k * invr + 2.0 * invr * invr)
        rh = d * invr[:, :, None]
        outer = rh[:, :, :, None] * rh[:, :, None, :]
        kmat = (self.k ** 2 * g + gp * invr)[:, :, None, None] * np.eye(3) + (
            gpp - gp * invr
        )[:, :, None, None] * outer
        kmat[eye_mask] = 0.0
        blocks = self.strengths[None, :, None, None] * (kmat @ self.xi)
        mat = blocks.transpose(0, 2, 1, 3).reshape(3 * n, 3 * n)
        mat[np.arange(3 * n), np.arange(3 * n)] += 1.0
        return mat
