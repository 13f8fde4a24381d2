import numpy as np
import pytest

import oracles
from qmx.grid import FieldState, GridSpec
from qmx.initial_data import (
    DataBundle,
    InitialJet,
    check_compatibility,
    compatible_boundary_data,
    compute_jet,
    compute_Mkp,
    jet_realizing_extension,
)
from qmx.materials import KerrLaw, vacuum
from qmx.norms import Trajectory

OPEN_PEC = ("open", "open", "pec_bottom_open_top")


def rel_err(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-300)


def test_jet_matches_symbolic_linear_oracle():
    S_sym = oracles.sympy_linear_jet(oracles.POLY_CHI, oracles.POLY_SIGMA, oracles.poly_u0(), oracles.poly_f(), 3)
    jet = compute_jet(oracles.poly_law(), oracles.poly_bundle(), 3)
    assert np.array_equal(jet[0], oracles.poly_bundle().u0.values)
    for p in range(1, 4):
        assert rel_err(jet[p], oracles.evaluate(list(S_sym[p]), oracles.POLY_GRID)) <= 1e-9


def test_jet_matches_power_series_kerr():
    law, bundle, f_coeffs = oracles.kerr_periodic_case()
    ref = oracles.kerr_series_jet(law, bundle.u0.values, f_coeffs, bundle.grid, 3)
    jet = compute_jet(law, bundle, 3)
    for p in range(4):
        assert rel_err(jet[p], ref[p]) <= 1e-9


def uniform_bundle(grid, y0):
    u = np.broadcast_to(np.asarray(y0, float)[:, None, None, None], (6,) + grid.shape).copy()
    return DataBundle(0.0, FieldState(grid, 0.0, u))


def test_kerr_ode_jet():
    grid = GridSpec.box(4, boundary=("periodic",) * 3)
    y0 = [0.8, 0.3, 0.0, 0.0, 0.2, 0.1]
    law = KerrLaw(0.5, conductivity_scale=1.0)
    jet = compute_jet(law, uniform_bundle(grid, y0), 3)
    ref = oracles.kerr_ode_jet(0.5, 1.0, 0.0, y0, 3)
    S1 = -np.linalg.solve(law.chi(np.array(y0)[:, None])[..., 0], law.sigma(np.array(y0)[:, None])[..., 0] @ y0)
    assert np.allclose(jet[1][:, 0, 0, 0], S1, rtol=1e-12)
    for p in range(4):
        assert rel_err(jet[p][:, 1, 2, 3], ref[p]) <= 1e-9


def test_vacuum_first_jet_entry():
    grid = GridSpec.box(5, boundary=OPEN_PEC)
    u = grid.zeros()
    u[5] = grid.mesh()[0]
    jet = compute_jet(vacuum(), DataBundle(0.0, FieldState(grid, 0.0, u)), 1)
    want = grid.zeros()
    want[1] = -1.0
    assert np.allclose(jet[1], want, atol=1e-12)


def test_mkp_examples():
    law = KerrLaw(1.0, conductivity_scale=0.5)
    grid = GridSpec.box(4, boundary=("periodic",) * 3)
    bundle = uniform_bundle(grid, [0.6, -0.2, 0.1, 0.0, 0.0, 0.0])
    jet = compute_jet(law, bundle, 2)
    assert np.array_equal(compute_Mkp(law, bundle.u0, jet.arrays(), 2, 0), law.sigma(bundle.u0.values))
    M1 = compute_Mkp(law, bundle.u0, jet.arrays(), 1, 1)
    h = 1e-6
    y, s1 = bundle.u0.values, jet[1]
    fd = (law.chi(y + h * s1) - law.chi(y - h * s1)) / (2 * h)
    assert np.allclose(M1, fd, rtol=1e-7, atol=1e-9)
    vac = uniform_bundle(grid, [0.6, -0.2, 0.1, 0.3, 0.0, 0.0])
    vjet = compute_jet(vacuum(), vac, 3)
    for p in (1, 2, 3):
        assert not np.any(compute_Mkp(vacuum(), vac.u0, vjet.arrays(), 1, p))
        assert not np.any(compute_Mkp(vacuum(), vac.u0, vjet.arrays(), 2, p))
    with pytest.raises(Exception):
        compute_Mkp(law, bundle.u0, jet.arrays()[:1], 1, 2)


def test_state_independent_law_matches_linear_recursion():
    law = oracles.poly_law()
    bundle = oracles.poly_bundle()
    full = compute_jet(law, bundle, 3)
    frozen = compute_jet(law, bundle, 3, frozen=(oracles.POLY_CHI, oracles.POLY_SIGMA))
    for p in range(4):
        assert np.allclose(full[p], frozen[p], rtol=1e-13, atol=1e-12)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_jet_locality(p):
    law, bundle, _ = oracles.kerr_periodic_case()
    grid = GridSpec.box(12, boundary=("periodic", "periodic", "open"))
    x = grid.mesh()
    u0 = np.stack([0.3 * np.sin(2 * np.pi * (x[0] + k * x[1])) * (1 + x[2]) for k in range(6)])
    base = DataBundle(0.0, FieldState(grid, 0.0, u0))
    pert = u0.copy()
    pert[:, 2, 3, 10] += 0.7
    S_a = compute_jet(law, base, p)[p]
    S_b = compute_jet(law, base.with_u0(pert), p)[p]
    idx = np.indices(grid.shape)
    dist = np.maximum.reduce([np.minimum(np.abs(idx[0] - 2), 12 - np.abs(idx[0] - 2)),
                              np.minimum(np.abs(idx[1] - 3), 12 - np.abs(idx[1] - 3)),
                              np.abs(idx[2] - 10)])
    far = dist > 2 * p  # one-sided closures reach two nodes
    assert np.array_equal(S_a[:, far], S_b[:, far])
    assert not np.array_equal(S_a, S_b)


def test_compatibility_pass_and_fail():
    g = oracles.poly_compatible_g(2)
    rep = check_compatibility(oracles.poly_law(), oracles.poly_bundle(g), 3)
    assert rep.passed and len(rep.per_order_residual) == 3
    assert max(mx for _, _, mx in rep.per_order_residual) <= 1e-10
    grid = GridSpec.box(6, boundary=OPEN_PEC)
    u = grid.zeros()
    u[5] = grid.mesh()[0]
    bad = check_compatibility(vacuum(), DataBundle(0.0, FieldState(grid, 0.0, u)), 3)
    assert bad.max_residual(0) == 0.0
    assert bad.max_residual(1) > 1e-3 and not bad.passed
    assert "FAIL" in bad.table() and bad.to_csv().startswith("p,face_l2,max")


def test_compatible_boundary_data_by_construction():
    law, _, _ = oracles.kerr_periodic_case()
    grid = GridSpec.box(6, boundary=("periodic", "periodic", "pec_bottom_open_top"))
    x = grid.mesh()
    u0 = np.stack([0.2 * np.cos(2 * np.pi * (x[0] + k * x[1])) * (1 - x[2]) for k in range(6)])
    bundle = DataBundle(0.0, FieldState(grid, 0.0, u0))
    g = compatible_boundary_data(compute_jet(law, bundle, 2))
    rep = check_compatibility(law, DataBundle(0.0, bundle.u0, None, g), 3)
    assert rep.passed


def test_rho_derived_and_mismatch():
    grid = GridSpec.box(5, boundary=OPEN_PEC)
    x = grid.mesh()
    u = grid.zeros()
    u[0] = x[0] ** 2
    bundle = DataBundle(0.0, FieldState(grid, 0.0, u))
    assert np.allclose(bundle.charge_density(vacuum()), 2 * x[0])
    explicit = DataBundle(0.0, bundle.u0, rho0=np.zeros(grid.shape))
    assert check_compatibility(vacuum(), explicit, 1).rho_mismatch > 0


def test_extension_reproduces_jet():
    law, bundle, _ = oracles.kerr_periodic_case()
    jet = compute_jet(law, bundle, 3)
    ext = jet_realizing_extension(jet, 0.2)
    for a, b in zip(ext.jet(3), jet.arrays()):
        assert np.array_equal(a, b)
    dt = 1e-3
    v = [ext.value(k * dt) for k in range(3)]
    assert np.allclose((-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt), jet[1], atol=50 * dt**2 * np.max(np.abs(jet[3])))
    assert not np.any(ext.value(0.2)) and not np.any(ext.value(0.35))


def test_extension_examples():
    grid = GridSpec.box(3, boundary=("periodic",) * 3)
    u0 = np.random.default_rng(0).standard_normal((6,) + grid.shape)
    z = np.zeros_like(u0)
    ext = jet_realizing_extension(InitialJet([FieldState(grid, 0.0, a) for a in (u0, z, z)]), 1.0)
    assert np.array_equal(ext.value(0.3), u0)
    S1 = np.ones_like(u0)
    ext = jet_realizing_extension(InitialJet([FieldState(grid, 0.0, a) for a in (z, S1)]), 1.0)
    assert np.allclose(ext.value(0.25), 0.25 * S1)
    assert np.allclose(ext.derivative(0.25, 1), S1)
    assert np.all(np.abs(ext.value(0.75)) < 0.75)
    traj = ext.sample(np.linspace(0, 0.4, 5))
    assert isinstance(traj, Trajectory) and np.allclose(traj.derivs[2], S1)
    with pytest.raises(ValueError):
        jet_realizing_extension(InitialJet([FieldState(grid, 0.0, z)]), 0.0)
