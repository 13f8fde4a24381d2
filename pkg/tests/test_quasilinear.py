import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qmx.grid import FieldState, GridSpec
from qmx.initial_data import DataBundle, JetError, compute_jet, jet_realizing_extension
from qmx.linear import StepperConfig
from qmx.materials import KerrLaw, StateDomain, vacuum
from qmx.quasilinear import (
    PicardConfig,
    blowup_monitor,
    continue_maximal,
    contraction_estimate,
    pde_residual,
    picard_slab,
    probe_pair,
)
from qmx.scenarios import build_scenario


PERIODIC = ("periodic",) * 3


def uniform_bundle(y0, n=4):
    g = GridSpec.box(n, boundary=PERIODIC)
    u = np.asarray(y0, dtype=float)[:, None, None, None] * np.ones((6,) + g.shape)
    return DataBundle(0.0, FieldState(g, 0.0, u), rho0=np.zeros(g.shape))


def test_config_validation():
    for bad in (dict(slab_width=0.0), dict(max_iterations=0), dict(fp_tolerance=0.0), dict(radius_R=-1.0),
                dict(kappa_guard=-0.1), dict(max_halvings=-1)):
        with pytest.raises(ValueError):
            PicardConfig(**bad)


def test_vacuum_fixed_point_in_one_iteration():
    sc = build_scenario("vacuum_pulse")
    traj, rep = picard_slab(sc.law, sc.bundle, 2, sc.picard, tau=0.02)
    assert rep.iterations == 1 and rep.fp_distance == 0.0
    assert traj.t_end == pytest.approx(0.02)


def test_zero_data_stays_zero():
    law = KerrLaw(1.0, conductivity_scale=0.5)
    bundle = uniform_bundle(np.zeros(6))
    traj, rep = picard_slab(law, bundle, 2, PicardConfig(), tau=0.05)
    assert not np.any(traj.values) and rep.iterations <= 2


def kerr_ode_rhs(law):
    def rhs(_, y):
        Y = y[:, None, None, None]
        chi = law.chi(Y)[..., 0, 0, 0]
        sig = law.sigma(Y)[..., 0, 0, 0]
        return np.linalg.solve(chi, -sig @ y)
    return rhs


def test_uniform_fields_follow_the_ode():
    law = KerrLaw(0.5, conductivity_scale=1.0, conductivity_quadratic=0.3)
    y0 = np.array([0.8, 0.3, 0.0, 0.0, 0.2, 0.1])
    cfg = PicardConfig(slab_width=0.1, stepper=StepperConfig(dt=0.005, dissipation_coeff=0.0))
    out = continue_maximal(law, uniform_bundle(y0), 3, cfg, horizon=0.5)
    assert out.status == "horizon_reached"
    ref = solve_ivp(kerr_ode_rhs(law), (0, 0.5), y0, t_eval=out.trajectory.times, rtol=1e-12, atol=1e-14)
    got = out.trajectory.values[:, :, 0, 0, 0]
    assert np.max(np.abs(got - ref.y.T)) <= 1e-6
    # fields are uniform, so the spatial stencils contribute nothing
    assert np.ptp(out.trajectory.values[-1], axis=(1, 2, 3)).max() == 0.0


def test_picard_converges_and_reports():
    sc = build_scenario("kerr_pulse")
    traj, rep = picard_slab(sc.law, sc.bundle, sc.m, sc.picard)
    assert rep.iterations <= 15 and rep.fp_distance <= 1e-9
    assert rep.contraction_ratio is not None and rep.contraction_ratio <= 0.75
    assert all(d2 < d1 for d1, d2 in zip(rep.distances[1:], rep.distances[2:]) if d2 > 1e-13)


def test_fixed_point_solves_nonlinear_equation():
    # without artificial dissipation the stored stage derivative satisfies the
    # semi-discrete nonlinear equation up to the Picard tolerance
    sc = build_scenario("kerr_pulse")
    cfg = PicardConfig(stepper=StepperConfig(dissipation_coeff=0.0))
    traj, _ = picard_slab(sc.law, sc.bundle, sc.m, cfg, tau=0.02)
    assert np.max(pde_residual(sc.law, traj, sc.bundle)) < 1e-8


def test_blowup_monitor_cases():
    g = GridSpec.box(4, boundary=PERIODIC)
    cfg = PicardConfig(lipschitz_threshold=5.0)
    law = KerrLaw(1.0)
    small = FieldState(g, 0.3, np.full((6,) + g.shape, 0.1))
    assert blowup_monitor(small, law, cfg) is None
    big = FieldState(g, 0.7, np.full((6,) + g.shape, 6.0))
    sig = blowup_monitor(big, law, cfg)
    assert sig.kind == "lipschitz" and sig.time == 0.7 and sig.value == pytest.approx(6.0)
    bounded = KerrLaw(1.0, state_domain=StateDomain.ball(1.0))
    near = FieldState(g, 0.1, np.full((6,) + g.shape, 0.39))
    sig = blowup_monitor(near, bounded, cfg, kappa=0.1)
    assert sig.kind == "state_domain" and sig.value < 0.1


def test_blowup_scenario_terminates():
    sc = build_scenario("kerr_ode_blowup")
    out = continue_maximal(sc.law, sc.bundle, sc.m, sc.picard, sc.horizon)
    assert out.status == "blowup_lipschitz"
    assert 1.5 < out.termination_time < 1.9
    assert out.trajectory.t_end >= out.termination_time


def test_contraction_probe_checks():
    sc = build_scenario("kerr_pulse")
    p1, p2 = probe_pair(sc.law, sc.bundle, sc.m, 0.05)
    res = contraction_estimate(sc.law, sc.bundle, sc.m, sc.picard, (p1, p1), tau=0.05)
    assert res.degenerate
    other = p1.perturbed(0, 0.1 * sc.bundle.u0.values)
    with pytest.raises(JetError):
        contraction_estimate(sc.law, sc.bundle, sc.m, sc.picard, (p1, other), tau=0.05)
    res = contraction_estimate(sc.law, sc.bundle, sc.m, sc.picard, (p1, p2), tau=0.025)
    assert 0 < res.ratio < 0.5


def test_vacuum_contraction_vanishes():
    sc = build_scenario("vacuum_pulse")
    pair = probe_pair(sc.law, sc.bundle, 2, 0.02)
    res = contraction_estimate(sc.law, sc.bundle, 2, sc.picard, pair, tau=0.02)
    assert res.ratio == 0.0


def test_seed_with_wrong_jet_rejected():
    sc = build_scenario("kerr_pulse")
    jet = compute_jet(sc.law, sc.bundle, sc.m)
    bad = jet_realizing_extension(jet, 0.1).perturbed(1, np.ones_like(jet[0]))
    with pytest.raises(JetError):
        picard_slab(sc.law, sc.bundle, sc.m, sc.picard, seed=bad)


def test_vacuum_matches_linear_law():
    # state-independent law: continue_maximal reduces to chained linear solves
    sc = build_scenario("vacuum_pulse")
    out = continue_maximal(vacuum(), sc.bundle, 2, sc.picard, horizon=0.1)
    assert out.status == "horizon_reached" and out.trajectory.t_end == pytest.approx(0.1)
    assert len(out.per_slab) == 2
