import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qmx import _kernels

needs_numba = pytest.mark.skipif(not _kernels.HAVE_NUMBA, reason="numba unavailable")


@pytest.fixture
def rng():
    return np.random.default_rng(11)


@needs_numba
@pytest.mark.parametrize("periodic", [True, False])
@pytest.mark.parametrize("axis", [1, 2, 3])
def test_diff_parity(rng, axis, periodic):
    f = rng.standard_normal((6, 7, 8, 9))
    a = _kernels.diff_axis_numba(f, axis, 0.1, periodic)
    b = _kernels.diff_axis_numpy(f, axis, 0.1, periodic)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-13)


@needs_numba
@pytest.mark.parametrize("periodic", [True, False])
@pytest.mark.parametrize("axis", [1, 2, 3])
def test_fourth_difference_parity(rng, axis, periodic):
    f = rng.standard_normal((6, 7, 8, 9))
    a = _kernels.fourth_difference_numba(f, axis, periodic)
    b = _kernels.fourth_difference_numpy(f, axis, periodic)
    assert np.allclose(a, b, rtol=1e-14, atol=1e-13)


@needs_numba
def test_pointwise_algebra_parity(rng):
    M = rng.standard_normal((6, 6, 3, 4, 5))
    A = np.einsum("ik...,jk...->ij...", M, M) + 6 * np.eye(6)[:, :, None, None, None]
    u = rng.standard_normal((6, 3, 4, 5))
    assert np.allclose(_kernels.matvec_numba(A, u), _kernels.matvec_numpy(A, u), rtol=1e-13)
    x = _kernels.spd_solve_numba(A, u)
    assert np.allclose(x, _kernels.spd_solve_numpy(A, u), rtol=1e-10)
    assert np.allclose(_kernels.matvec_numpy(A, x), u, atol=1e-10)


def test_spd_solve_rejects_indefinite():
    A = np.broadcast_to(-np.eye(6)[:, :, None, None, None], (6, 6, 2, 2, 2)).copy()
    b = np.ones((6, 2, 2, 2))
    with pytest.raises(np.linalg.LinAlgError):
        _kernels.spd_solve(A, b)


def test_fourth_difference_kills_cubics():
    x = np.linspace(0, 1, 12)
    f = np.broadcast_to((x**3 - 2 * x)[None, :, None, None], (1, 12, 3, 3)).copy()
    assert np.max(np.abs(_kernels.fourth_difference(f, 1, False))) < 1e-12


SCRIPT = """
import json, numpy as np
from qmx import _kernels
from qmx.scenarios import build_scenario
from qmx.quasilinear import picard_slab
sc = build_scenario("kerr_pulse")
traj, rep = picard_slab(sc.law, sc.bundle, sc.m, sc.picard, tau=0.01)
print(json.dumps({"backend": _kernels.BACKEND, "final": traj.values[-1].ravel()[::97].tolist(),
                  "iterations": rep.iterations}))
"""


def run_backend(disable: bool) -> dict:
    env = dict(os.environ, QMX_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", SCRIPT], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


@needs_numba
def test_backends_agree_end_to_end():
    fast = run_backend(False)
    slow = run_backend(True)
    assert fast["backend"] == "numba" and slow["backend"] == "numpy"
    assert fast["iterations"] == slow["iterations"]
    assert np.allclose(fast["final"], slow["final"], rtol=1e-11, atol=1e-13)
