"""Hot numeric kernels with a numba fast path and a numpy/scipy fallback.

The lane is chosen once at import time: set ``WICKHEAT_NUMBA=0`` in the
environment to force the fallback (useful on platforms without a working
numba, and for benchmarking the two lanes against each other; see
``benchmarks/bench_kernels.py``). Both lanes implement the same arithmetic.

Kernels
-------
cn_solve            Crank-Nicolson time stepping of u_t = u_xx - q u + f with
                    homogeneous Dirichlet ends; the dominant inner loop of
                    every chaos-coefficient solve.
accumulate_products elementwise multiply-accumulate over index pairs, the
                    inner loop of the Wick convolution.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["USING_NUMBA", "cn_solve", "accumulate_products"]


def _env_wants_numba() -> bool:
    flag = os.environ.get("WICKHEAT_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


# ---------------------------------------------------------------------------
# numpy lane
# ---------------------------------------------------------------------------

def _cn_solve_numpy(g, f, q, dx, dt):
    """Crank-Nicolson loop; the tridiagonal solve uses LAPACK via scipy."""
    from scipy.linalg import solve_banded

    nt, nx = f.shape
    u = np.empty((nt, nx))
    u[0] = g
    u[0, 0] = 0.0
    u[0, -1] = 0.0
    if nt == 1:
        return u

    r = dt / (dx * dx)
    qi = q[1:-1]
    # interior operator A = d^2/dx^2 - q; solve (I - dt/2 A) u+ = (I + dt/2 A) u + dt*fmid
    n = nx - 2
    ab = np.zeros((3, n))
    ab[0, 1:] = -0.5 * r                    # super-diagonal
    ab[1, :] = 1.0 + r + 0.5 * dt * qi      # diagonal
    ab[2, :-1] = -0.5 * r                   # sub-diagonal

    lo = 1.0 - r - 0.5 * dt * qi
    for step in range(nt - 1):
        ui = u[step, 1:-1]
        rhs = lo * ui
        rhs[1:] += 0.5 * r * ui[:-1]
        rhs[:-1] += 0.5 * r * ui[1:]
        rhs += 0.5 * dt * (f[step, 1:-1] + f[step + 1, 1:-1])
        u[step + 1, 1:-1] = solve_banded((1, 1), ab, rhs)
        u[step + 1, 0] = 0.0
        u[step + 1, -1] = 0.0
    return u


def _accumulate_products_numpy(left, right, pairs, out):
    for ia, ib in pairs:
        out += left[ia] * right[ib]
    return out


# ---------------------------------------------------------------------------
# numba lane
# ---------------------------------------------------------------------------

USING_NUMBA = False
cn_solve = None
accumulate_products = None

if _env_wants_numba():
    try:
        from numba import njit

        @njit(cache=True, nogil=True)
        def _cn_solve_numba(g, f, q, dx, dt):
            nt, nx = f.shape
            u = np.empty((nt, nx))
            for i in range(nx):
                u[0, i] = g[i]
            u[0, 0] = 0.0
            u[0, nx - 1] = 0.0
            if nt == 1:
                return u

            r = dt / (dx * dx)
            n = nx - 2
            diag = np.empty(n)
            lo = np.empty(n)
            for i in range(n):
                diag[i] = 1.0 + r + 0.5 * dt * q[i + 1]
                lo[i] = 1.0 - r - 0.5 * dt * q[i + 1]
            off = -0.5 * r

            # Thomas forward elimination of the constant matrix, done once.
            cp = np.empty(n)
            dp = np.empty(n)
            cp[0] = off / diag[0]
            for i in range(1, n):
                cp[i] = off / (diag[i] - off * cp[i - 1])

            rhs = np.empty(n)
            for step in range(nt - 1):
                for i in range(n):
                    rhs[i] = lo[i] * u[step, i + 1] + 0.5 * dt * (
                        f[step, i + 1] + f[step + 1, i + 1]
                    )
                for i in range(1, n - 1):
                    rhs[i] += 0.5 * r * (u[step, i] + u[step, i + 2])
                rhs[0] += 0.5 * r * u[step, 2]
                rhs[n - 1] += 0.5 * r * u[step, n - 1]

                dp[0] = rhs[0] / diag[0]
                for i in range(1, n):
                    dp[i] = (rhs[i] - off * dp[i - 1]) / (diag[i] - off * cp[i - 1])
                u[step + 1, n] = dp[n - 1]
                for i in range(n - 2, -1, -1):
                    u[step + 1, i + 1] = dp[i] - cp[i] * u[step + 1, i + 2]
                u[step + 1, 0] = 0.0
                u[step + 1, nx - 1] = 0.0
            return u

        @njit(cache=True, nogil=True)
        def _accumulate_products_numba(left, right, pairs, out):
            npair = pairs.shape[0]
            flat_out = out.reshape(-1)
            nl = left.shape[0]
            size = flat_out.shape[0]
            lf = left.reshape(nl, -1)
            rf = right.reshape(right.shape[0], -1)
            for ip in range(npair):
                a = pairs[ip, 0]
                b = pairs[ip, 1]
                for j in range(size):
                    flat_out[j] += lf[a, j] * rf[b, j]
            return out

        def _accumulate_numba_wrapper(left, right, pairs, out):
            pairs_arr = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
            return _accumulate_products_numba(left, right, pairs_arr, out)

        cn_solve = _cn_solve_numba
        accumulate_products = _accumulate_numba_wrapper
        USING_NUMBA = True
    except ImportError:
        pass

if cn_solve is None:
    cn_solve = _cn_solve_numpy
    accumulate_products = _accumulate_products_numpy
