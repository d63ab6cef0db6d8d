"""Compiled inner loops for the coupled-system sums.

Each output row is accumulated sequentially over sources by a single
worker, so results are bit-identical for any thread count. Falls back to
None when numba is unavailable; callers then use the vectorized numpy
path.
"""

from __future__ import annotations

import numpy as np

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a soft dependency
    nb = None


FOUR_PI = 4.0 * np.pi

if nb is not None:
    _jit = nb.njit(parallel=True, fastmath=True, cache=True, nogil=True)

    @_jit
    def kernel_sum_nb(xs, ys, w, k, exclude_offset, out):
        # out[q] = sum_p K(x_q, y_p) w_p, K = k^2 g I + Hess g
        c = xs.shape[0]
        n = ys.shape[0]
        k2 = k * k
        for q in nb.prange(c):
            a0 = 0.0j
            a1 = 0.0j
            a2 = 0.0j
            x0 = xs[q, 0]
            x1 = xs[q, 1]
            x2 = xs[q, 2]
            skip = q + exclude_offset if exclude_offset >= 0 else -1
            for p in range(n):
                if p == skip:
                    continue
                d0 = x0 - ys[p, 0]
                d1 = x1 - ys[p, 1]
                d2 = x2 - ys[p, 2]
                r2 = d0 * d0 + d1 * d1 + d2 * d2
                r = np.sqrt(r2)
                invr = 1.0 / r
                kr = k * r
                g = complex(np.cos(kr), np.sin(kr)) * (invr / FOUR_PI)
                gp = g * complex(-invr, k)
                gpp = g * complex(-k2 + 2.0 * invr * invr, -2.0 * k * invr)
                c1 = k2 * g + gp * invr
                c2 = gpp - gp * invr
                rh0 = d0 * invr
                rh1 = d1 * invr
                rh2 = d2 * invr
                rw = rh0 * w[p, 0] + rh1 * w[p, 1] + rh2 * w[p, 2]
                t = c2 * rw
                a0 += c1 * w[p, 0] + t * rh0
                a1 += c1 * w[p, 1] + t * rh1
                a2 += c1 * w[p, 2] + t * rh2
            out[q, 0] = a0
            out[q, 1] = a1
            out[q, 2] = a2

    @_jit
    def cross_sum_nb(xs, ys, w, k, exclude_offset, out):
        # out[q] = sum_p grad g(x_q, y_p) x w_p
        c = xs.shape[0]
        n = ys.shape[0]
        for q in nb.prange(c):
            a0 = 0.0j
            a1 = 0.0j
            a2 = 0.0j
            x0 = xs[q, 0]
            x1 = xs[q, 1]
            x2 = xs[q, 2]
            skip = q + exclude_offset if exclude_offset >= 0 else -1
            for p in range(n):
                if p == skip:
                    continue
                d0 = x0 - ys[p, 0]
                d1 = x1 - ys[p, 1]
                d2 = x2 - ys[p, 2]
                r2 = d0 * d0 + d1 * d1 + d2 * d2
                r = np.sqrt(r2)
                invr = 1.0 / r
                kr = k * r
                g = complex(np.cos(kr), np.sin(kr)) * (invr / FOUR_PI)
                s = g * complex(-invr, k) * invr  # grad g = s * d
                a0 += s * (d1 * w[p, 2] - d2 * w[p, 1])
                a1 += s * (d2 * w[p, 0] - d0 * w[p, 2])
                a2 += s * (d0 * w[p, 1] - d1 * w[p, 0])
            out[q, 0] = a0
            out[q, 1] = a1
            out[q, 2] = a2

    def set_threads(n: int):
        nb.set_num_threads(max(1, min(int(n), nb.config.NUMBA_NUM_THREADS)))

else:  # pragma: no cover
    kernel_sum_nb = None
    cross_sum_nb = None

    def set_threads(n: int):
        return None
