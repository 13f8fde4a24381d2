"""Timing comparison of the numba kernels against their numpy references."""

from __future__ import annotations

import time

import numpy as np

from . import _kernels


def _time(fn, repeat: int) -> float:
    fn()  # warm-up (includes compilation for numba)
    best = float("inf")
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t)
    return best


def kernel_cases(n: int, rng: np.random.Generator):
    shape = (n, n, n + 1)
    u = rng.standard_normal((6,) + shape)
    M = rng.standard_normal((6, 6) + shape) * 0.1
    A = np.einsum("ik...,jk...->ij...", M, M) + 2.0 * np.eye(6)[:, :, None, None, None]
    A = np.ascontiguousarray(A)
    h = 1.0 / n
    return {
        "diff_axis(x1)": (lambda: _kernels.diff_axis_numba(u, 1, h, True), lambda: _kernels.diff_axis_numpy(u, 1, h, True)),
        "diff_axis(x3)": (lambda: _kernels.diff_axis_numba(u, 3, h, False), lambda: _kernels.diff_axis_numpy(u, 3, h, False)),
        "fourth_difference(x2)": (lambda: _kernels.fourth_difference_numba(u, 2, True),
                                  lambda: _kernels.fourth_difference_numpy(u, 2, True)),
        "fourth_difference(x3)": (lambda: _kernels.fourth_difference_numba(u, 3, False),
                                  lambda: _kernels.fourth_difference_numpy(u, 3, False)),
        "matvec": (lambda: _kernels.matvec_numba(A, u), lambda: _kernels.matvec_numpy(A, u)),
        "spd_solve": (lambda: _kernels.spd_solve_numba(A, u), lambda: _kernels.spd_solve_numpy(A, u)),
    }


def run_benchmark(n: int = 32, repeat: int = 5, seed: int = 0) -> str:
    """Best-of-``repeat`` times per kernel and the resulting speedup, as a text table."""
    lines = [f"grid {n}x{n}x{n + 1}, best of {repeat}", f"{'kernel':24s} {'numba ms':>10s} {'numpy ms':>10s} {'speedup':>8s}"]
    if not _kernels.HAVE_NUMBA:
        lines.append("numba unavailable (QMX_DISABLE_NUMBA set or not installed); nothing to compare")
        return "\n".join(lines)
    for name, (fast, ref) in kernel_cases(n, np.random.default_rng(seed)).items():
        a, b = np.asarray(fast()), np.asarray(ref())
        if not np.allclose(a, b, rtol=1e-10, atol=1e-10):
            raise AssertionError(f"{name}: numba and numpy disagree")
        tf, tr = _time(fast, repeat), _time(ref, repeat)
        lines.append(f"{name:24s} {1e3 * tf:10.3f} {1e3 * tr:10.3f} {tr / tf:8.2f}")
    return "\n".join(lines)
