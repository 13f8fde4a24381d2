"""Hot stencil and pointwise-algebra kernels.

Every kernel exists twice: a numba ``@njit`` version and a pure-numpy
version with identical semantics. The numba path is used when numba imports
and ``QMX_DISABLE_NUMBA`` is unset (or ``0``); setting ``QMX_DISABLE_NUMBA=1``
forces the numpy path. ``QMX_THREADS`` caps numba worker threads.

Array layout is component-first: vector fields are ``(nc, n1, n2, n3)``,
matrix fields ``(6, 6, n1, n2, n3)``.
"""

from __future__ import annotations

import os

import numpy as np

_DISABLE = os.environ.get("QMX_DISABLE_NUMBA", "0") not in ("", "0", "false", "False")

try:
    if _DISABLE:
        raise ImportError("numba disabled by QMX_DISABLE_NUMBA")
    import numba
    from numba import njit

    HAVE_NUMBA = True
    _threads = os.environ.get("QMX_THREADS")
    if _threads:
        numba.set_num_threads(max(1, min(int(_threads), numba.config.NUMBA_NUM_THREADS)))
except ImportError:  # pragma: no cover - exercised via env flag in a subprocess
    HAVE_NUMBA = False

BACKEND = "numba" if HAVE_NUMBA else "numpy"


# ---------------------------------------------------------------------------
# numpy reference kernels


def diff_axis_numpy(f: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    """Second-order first derivative of ``f`` along array axis ``axis``."""
    out = np.empty_like(f, dtype=np.result_type(f, float) if f.dtype != object else object)
    n = f.shape[axis]
    fm = np.moveaxis(f, axis, 0)
    om = np.moveaxis(out, axis, 0)
    if periodic:
        om[...] = (np.roll(fm, -1, axis=0) - np.roll(fm, 1, axis=0)) / (2 * h)
        return out
    om[1 : n - 1] = (fm[2:] - fm[: n - 2]) / (2 * h)
    om[0] = (-3 * fm[0] + 4 * fm[1] - fm[2]) / (2 * h)
    om[n - 1] = (3 * fm[n - 1] - 4 * fm[n - 2] + fm[n - 3]) / (2 * h)
    return out


def fourth_difference_numpy(f: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    """Undivided fourth difference; zero within two nodes of a non-periodic face."""
    fm = np.moveaxis(f, axis, 0)
    out = np.zeros_like(f)
    om = np.moveaxis(out, axis, 0)
    if periodic:
        om[...] = (
            np.roll(fm, 2, 0) - 4 * np.roll(fm, 1, 0) + 6 * fm
            - 4 * np.roll(fm, -1, 0) + np.roll(fm, -2, 0)
        )
        return out
    n = fm.shape[0]
    if n >= 5:
        om[2 : n - 2] = fm[: n - 4] - 4 * fm[1 : n - 3] + 6 * fm[2 : n - 2] - 4 * fm[3 : n - 1] + fm[4:]
    return out


def matvec_numpy(A: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Nodewise ``A @ u`` for ``A`` of shape (6, 6, *g) or (6, 6)."""
    if A.ndim == 2:
        return np.tensordot(A, u, axes=(1, 0))
    return np.einsum("ij...,j...->i...", A, u)


def spd_solve_numpy(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Nodewise solve of ``A x = b`` for symmetric positive definite 6x6 blocks."""
    if A.ndim == 2:
        return np.tensordot(np.linalg.inv(A), b, axes=(1, 0))
    g = b.shape[1:]
    Am = np.moveaxis(A.reshape(6, 6, -1), -1, 0)
    bm = np.moveaxis(b.reshape(6, -1), -1, 0)[..., None]
    x = np.linalg.solve(Am, bm)[..., 0]
    return np.moveaxis(x, 0, -1).reshape((6,) + g)


# ---------------------------------------------------------------------------
# numba kernels

if HAVE_NUMBA:

    @njit(cache=True)
    def _diff_last(f, h, periodic, out):
        # f, out: (m, n) views with the differentiated axis last
        m, n = f.shape
        c = 1.0 / (2.0 * h)
        for r in range(m):
            for i in range(1, n - 1):
                out[r, i] = (f[r, i + 1] - f[r, i - 1]) * c
            if periodic:
                out[r, 0] = (f[r, 1] - f[r, n - 1]) * c
                out[r, n - 1] = (f[r, 0] - f[r, n - 2]) * c
            else:
                out[r, 0] = (-3.0 * f[r, 0] + 4.0 * f[r, 1] - f[r, 2]) * c
                out[r, n - 1] = (3.0 * f[r, n - 1] - 4.0 * f[r, n - 2] + f[r, n - 3]) * c

    @njit(cache=True)
    def _diff_mid(f, h, periodic, out):
        # f, out: (a, n, b) with the differentiated axis in the middle
        a, n, b = f.shape
        c = 1.0 / (2.0 * h)
        for r in range(a):
            for i in range(1, n - 1):
                for s in range(b):
                    out[r, i, s] = (f[r, i + 1, s] - f[r, i - 1, s]) * c
            for s in range(b):
                if periodic:
                    out[r, 0, s] = (f[r, 1, s] - f[r, n - 1, s]) * c
                    out[r, n - 1, s] = (f[r, 0, s] - f[r, n - 2, s]) * c
                else:
                    out[r, 0, s] = (-3.0 * f[r, 0, s] + 4.0 * f[r, 1, s] - f[r, 2, s]) * c
                    out[r, n - 1, s] = (3.0 * f[r, n - 1, s] - 4.0 * f[r, n - 2, s] + f[r, n - 3, s]) * c

    @njit(cache=True)
    def _fourth_mid(f, periodic, out):
        a, n, b = f.shape
        for r in range(a):
            for i in range(n):
                if periodic:
                    im2 = (i - 2) % n
                    im1 = (i - 1) % n
                    ip1 = (i + 1) % n
                    ip2 = (i + 2) % n
                elif i < 2 or i > n - 3:
                    for s in range(b):
                        out[r, i, s] = 0.0
                    continue
                else:
                    im2 = i - 2
                    im1 = i - 1
                    ip1 = i + 1
                    ip2 = i + 2
                for s in range(b):
                    out[r, i, s] = (
                        f[r, im2, s] - 4.0 * f[r, im1, s] + 6.0 * f[r, i, s]
                        - 4.0 * f[r, ip1, s] + f[r, ip2, s]
                    )

    @njit(cache=True)
    def _fourth_last(f, periodic, out):
        m, n = f.shape
        for r in range(m):
            if periodic:
                for i in range(n):
                    out[r, i] = (
                        f[r, (i - 2) % n] - 4.0 * f[r, (i - 1) % n] + 6.0 * f[r, i]
                        - 4.0 * f[r, (i + 1) % n] + f[r, (i + 2) % n]
                    )
            else:
                for i in range(n):
                    if i < 2 or i > n - 3:
                        out[r, i] = 0.0
                    else:
                        out[r, i] = f[r, i - 2] - 4.0 * f[r, i - 1] + 6.0 * f[r, i] - 4.0 * f[r, i + 1] + f[r, i + 2]

    @njit(cache=True)
    def _matvec_field(A, u, out):
        # A: (6, 6, N), u/out: (6, N)
        N = u.shape[1]
        for p in range(N):
            for i in range(6):
                s = 0.0
                for j in range(6):
                    s += A[i, j, p] * u[j, p]
                out[i, p] = s

    @njit(cache=True)
    def _spd_solve_field(A, b, out):
        # Cholesky per node; A: (6, 6, N), b/out: (6, N)
        N = b.shape[1]
        L = np.zeros((6, 6))
        y = np.zeros(6)
        for p in range(N):
            for i in range(6):
                for j in range(i + 1):
                    s = A[i, j, p]
                    for k in range(j):
                        s -= L[i, k] * L[j, k]
                    if i == j:
                        if s <= 0.0:
                            return p
                        L[i, i] = np.sqrt(s)
                    else:
                        L[i, j] = s / L[j, j]
            for i in range(6):
                s = b[i, p]
                for k in range(i):
                    s -= L[i, k] * y[k]
                y[i] = s / L[i, i]
            for i in range(5, -1, -1):
                s = y[i]
                for k in range(i + 1, 6):
                    s -= L[k, i] * out[k, p]
                out[i, p] = s / L[i, i]
        return -1

    def diff_axis_numba(f: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
        f = np.ascontiguousarray(f, dtype=np.float64)
        shape = f.shape
        a = int(np.prod(shape[:axis]))
        n = shape[axis]
        b = int(np.prod(shape[axis + 1 :]))
        out = np.empty_like(f)
        if b == 1:
            _diff_last(f.reshape(a, n), h, periodic, out.reshape(a, n))
        else:
            _diff_mid(f.reshape(a, n, b), h, periodic, out.reshape(a, n, b))
        return out

    def fourth_difference_numba(f: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
        f = np.ascontiguousarray(f, dtype=np.float64)
        shape = f.shape
        a = int(np.prod(shape[:axis]))
        n = shape[axis]
        b = int(np.prod(shape[axis + 1 :]))
        out = np.empty_like(f)
        if b == 1:
            _fourth_last(f.reshape(a, n), periodic, out.reshape(a, n))
        else:
            _fourth_mid(f.reshape(a, n, b), periodic, out.reshape(a, n, b))
        return out

    def matvec_numba(A: np.ndarray, u: np.ndarray) -> np.ndarray:
        if A.ndim == 2:
            return np.tensordot(A, u, axes=(1, 0))
        g = u.shape[1:]
        A2 = np.ascontiguousarray(A, dtype=np.float64).reshape(6, 6, -1)
        u2 = np.ascontiguousarray(u, dtype=np.float64).reshape(6, -1)
        out = np.empty_like(u2)
        _matvec_field(A2, u2, out)
        return out.reshape((6,) + g)

    def spd_solve_numba(A: np.ndarray, b: np.ndarray) -> np.ndarray:
        if A.ndim == 2:
            return np.tensordot(np.linalg.inv(A), b, axes=(1, 0))
        g = b.shape[1:]
        A2 = np.ascontiguousarray(A, dtype=np.float64).reshape(6, 6, -1)
        b2 = np.ascontiguousarray(b, dtype=np.float64).reshape(6, -1)
        out = np.empty_like(b2)
        bad = _spd_solve_field(A2, b2, out)
        if bad >= 0:
            raise np.linalg.LinAlgError(f"matrix at node {bad} is not positive definite")
        return out.reshape((6,) + g)


def _is_float_array(*arrays: np.ndarray) -> bool:
    return all(a.dtype.kind == "f" for a in arrays)


def diff_axis(f: np.ndarray, axis: int, h: float, periodic: bool) -> np.ndarray:
    if HAVE_NUMBA and _is_float_array(f) and f.ndim >= 1 and f.shape[axis] >= 3:
        return diff_axis_numba(f, axis, h, periodic)
    return diff_axis_numpy(f, axis, h, periodic)


def fourth_difference(f: np.ndarray, axis: int, periodic: bool) -> np.ndarray:
    if HAVE_NUMBA and _is_float_array(f):
        return fourth_difference_numba(f, axis, periodic)
    return fourth_difference_numpy(f, axis, periodic)


def matvec(A: np.ndarray, u: np.ndarray) -> np.ndarray:
    if HAVE_NUMBA and _is_float_array(A, u) and A.ndim > 2:
        return matvec_numba(A, u)
    return matvec_numpy(A, u)


def spd_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    if HAVE_NUMBA and _is_float_array(A, b) and A.ndim > 2:
        return spd_solve_numba(A, b)
    return spd_solve_numpy(A, b)
