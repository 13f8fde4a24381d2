import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmx.diagnostics import (
    ConeConfigError,
    ConeSpec,
    compatibility_corrected,
    cone_support_check,
    continuous_dependence_experiment,
    divergence_check,
    measured_front_speed,
    propagation_speed_bound,
)
from qmx.grid import FieldState, GridSpec
from qmx.initial_data import DataBundle, check_compatibility
from qmx.materials import KerrLaw, vacuum
from qmx.norms import Trajectory
from qmx.quasilinear import continue_maximal
from qmx.scenarios import build_scenario, perturbation_direction


def test_speed_bound():
    assert propagation_speed_bound(1.0) == 3.0
    assert propagation_speed_bound(2.0) == 1.5
    assert propagation_speed_bound(vacuum()) == 3.0
    with pytest.raises(ValueError):
        propagation_speed_bound(0.0)


def test_cone_spec_validation():
    with pytest.raises(ValueError):
        ConeSpec((0, 0, 0), 0.0, 1.0)
    with pytest.raises(ValueError):
        ConeSpec((0, 0, 0), 1.0, 1.0, direction="sideways")
    c = ConeSpec((0, 0, 0), 0.2, 3.0, "backward", t0=1.0)
    assert c.radius_at(1.05) == pytest.approx(0.05)


@pytest.fixture(scope="module")
def vacuum_run():
    sc = build_scenario("vacuum_pulse")
    out = continue_maximal(sc.law, sc.bundle, sc.m, sc.picard, 0.1)
    return sc, out.trajectory


def test_cone_passes_and_wrong_speed_fails(vacuum_run):
    sc, traj = vacuum_run
    # 16^3 grid: stencil smearing ahead of the front is about 1e-4
    rep = cone_support_check(traj, sc.cone, 2e-4)
    assert rep.passed and rep.initial_violation == 0.0
    slow = ConeSpec(sc.cone.center, sc.cone.radius, 0.2)
    bad = cone_support_check(traj, slow, 2e-4)
    assert not bad.passed and bad.max_violation > 1e-3


def test_cone_violation_monotone_in_speed(vacuum_run):
    sc, traj = vacuum_run
    viols = [cone_support_check(traj, ConeSpec(sc.cone.center, sc.cone.radius, s), 1.0).max_violation
             for s in (0.2, 0.5, 1.0, 2.0, 3.0)]
    assert all(a >= b for a, b in zip(viols, viols[1:]))


def test_cone_configuration_errors(vacuum_run):
    sc, traj = vacuum_run
    with pytest.raises(ConeConfigError):
        cone_support_check(traj, ConeSpec(sc.cone.center, 0.05, 3.0), 1e-6)
    with pytest.raises(ConeConfigError):
        cone_support_check(traj, ConeSpec(sc.cone.center, 0.35, 100.0), 1e-6)


def test_front_speed_below_bound(vacuum_run):
    sc, traj = vacuum_run
    assert 0.0 <= measured_front_speed(traj, sc.cone.center) <= propagation_speed_bound(sc.law)


def test_divergence_of_zero_field():
    g = GridSpec.box(6)
    traj = Trajectory.constant(FieldState(g, 0.0, g.zeros()), [0.0, 0.1, 0.2])
    rep = divergence_check(traj, DataBundle(0.0, FieldState(g, 0.0, g.zeros())), vacuum())
    assert np.all(rep.div_d_l2 == 0) and np.all(rep.div_b_l2 == 0)
    assert rep.growth_factor("d") == 0.0 and rep.drift("b") == 0.0


def test_divergence_detects_bad_magnetic_field():
    g = GridSpec.box(8, boundary=("periodic", "periodic", "open"))
    x3 = g.mesh()[2]
    u = g.zeros()
    u[5] = x3  # div H = 1
    traj = Trajectory.constant(FieldState(g, 0.0, u), [0.0, 0.1])
    rep = divergence_check(traj, DataBundle(0.0, FieldState(g, 0.0, u)), vacuum())
    assert rep.div_b_max[0] == pytest.approx(1.0)
    assert rep.div_d_l2[0] == 0.0


def test_divergence_stays_bounded(vacuum_run):
    sc, traj = vacuum_run
    rep = divergence_check(traj, sc.bundle, sc.law)
    assert rep.growth_factor("b") <= 10 and rep.growth_factor("d") <= 10


def test_charge_follows_conduction_current():
    # uniform E with conductivity: D decays but stays divergence free
    law = KerrLaw(0.5, conductivity_scale=1.0)
    g = GridSpec.box(4, boundary=("periodic",) * 3)
    u = g.zeros()
    u[0] = 0.3
    bundle = DataBundle(0.0, FieldState(g, 0.0, u))
    sc = build_scenario("kerr_ode_mode")
    out = continue_maximal(law, bundle, 2, sc.picard, 0.2)
    rep = divergence_check(out.trajectory, bundle, law)
    assert np.max(rep.div_d_max) < 1e-12


@settings(max_examples=5, deadline=None)
@given(st.floats(-1e-2, 1e-2).filter(lambda d: abs(d) > 1e-6))
def test_corrected_data_are_compatible(delta):
    sc = build_scenario("kerr_pulse")
    v = perturbation_direction(sc.grid)
    pert = compatibility_corrected(sc.law, sc.bundle, v, delta, sc.m)
    assert check_compatibility(sc.law, pert, sc.m, tolerance=1e-10).passed


def test_vacuum_dependence_is_linear():
    sc = build_scenario("vacuum_pulse")
    v = perturbation_direction(sc.grid)
    rep = continuous_dependence_experiment(sc.law, sc.bundle, 2, v, [1e-2, 1e-3, 1e-4], sc.picard, 0.05)
    assert rep.aborted is None and len(rep.ratios) == 3
    assert rep.spread() <= 1e-8
    assert all(r > 0 for r in rep.ratios)
