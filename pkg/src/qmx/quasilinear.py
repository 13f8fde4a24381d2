"""Picard iteration over frozen-coefficient linear solves, chained over time slabs."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import _kernels
from .grid import FieldState, maxwell_operator
from .initial_data import (DataBundle, JetError, JetExtension, check_compatibility, compute_jet,
                           jet_realizing_extension)
from .linear import BlowUpError, FrozenCoefficients, LinearProblem, StepperConfig, plan_steps, solve_linear
from .materials import MaterialLaw, StateDomainError
from .norms import Trajectory, gm_distance, gm_norm, lipschitz_norm, sobolev_norm

log = logging.getLogger(__name__)

STATUSES = ("converged", "blowup_lipschitz", "left_state_domain", "horizon_reached", "picard_stalled", "nonfinite")


class PicardStalled(RuntimeError):
    pass


@dataclass(frozen=True)
class PicardConfig:
    slab_width: float = 0.05
    max_iterations: int = 50
    fp_tolerance: float = 1e-9
    contraction_warn: float = 0.9
    radius_R: float | None = None
    kappa_guard: float | None = None  # None: half the initial distance to the state-domain boundary
    lipschitz_threshold: float = 1e6
    max_halvings: int = 6
    gamma: float = 0.0
    stepper: StepperConfig = field(default_factory=StepperConfig)

    def __post_init__(self):
        if not self.slab_width > 0:
            raise ValueError("slab_width must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        for name in ("fp_tolerance", "contraction_warn", "lipschitz_threshold"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.radius_R is not None and not self.radius_R > 0:
            raise ValueError("radius_R must be positive")
        if self.kappa_guard is not None and self.kappa_guard < 0:
            raise ValueError("kappa_guard must be nonnegative")
        if self.max_halvings < 0:
            raise ValueError("max_halvings must be nonnegative")


@dataclass
class SlabReport:
    t_start: float
    t_end: float
    iterations: int
    fp_distance: float
    contraction_ratio: float | None
    distances: list[float]
    compat_residual: float
    warnings: list[str] = field(default_factory=list)


@dataclass
class BlowupSignal:
    kind: str  # "lipschitz" or "state_domain"
    time: float
    value: float


@dataclass
class SolveOutcome:
    trajectory: Trajectory | None
    status: str
    per_slab: list[SlabReport]
    diagnostics: dict[str, list[float]]
    termination_time: float | None = None
    message: str = ""

    @property
    def t_reached(self) -> float:
        return self.trajectory.t_end if self.trajectory is not None else float("nan")


def _relative(d: float, scale: float) -> float:
    return d / scale if scale > 0 else d


def _measured_ratio(distances: list[float], floor: float) -> float | None:
    """Geometric-mean contraction rate of the successive distances.

    The first distance (seed to first image) is skipped since the seed need not
    lie near the fixed point; distances at or below ``floor`` are roundoff.
    """
    ds = [d for d in distances[1:] if d > floor]
    if len(ds) < 2:
        return None
    return float((ds[-1] / ds[0]) ** (1.0 / (len(ds) - 1)))


def _slab_problem(law: MaterialLaw, bundle: DataBundle, hat, tau: float) -> LinearProblem:
    return LinearProblem(FrozenCoefficients.from_law(law, bundle.grid, hat), bundle, tau)


def apply_phi(law: MaterialLaw, bundle: DataBundle, hat: Trajectory | JetExtension, tau: float,
              stepper: StepperConfig) -> Trajectory:
    """One application of the solution map: solve with ``chi(hat)``, ``sigma(hat)`` and the original data."""
    sol = solve_linear(_slab_problem(law, bundle, hat, tau), stepper, store=True, record_energy=False)
    return sol.trajectory


def slab_times(law: MaterialLaw, bundle: DataBundle, tau: float, stepper: StepperConfig) -> np.ndarray:
    n, dt = plan_steps(tau, bundle.grid, law.eta, stepper)
    return bundle.t0 + dt * np.arange(n + 1)


def picard_slab(law: MaterialLaw, bundle: DataBundle, m: int, cfg: PicardConfig,
                tau: float | None = None, seed: JetExtension | None = None) -> tuple[Trajectory, SlabReport]:
    """Iterate the frozen-coefficient solution map to its fixed point on ``[t0, t0 + tau]``.

    The seed defaults to the jet-realizing extension of the initial jet, so
    every iterate has the prescribed time derivatives at ``t0``.
    """
    if m < 1:
        raise ValueError("m must be at least 1")
    tau = cfg.slab_width if tau is None else tau
    y0 = bundle.u0.values
    if cfg.kappa_guard is not None and law.distance_to_state_boundary(y0) < cfg.kappa_guard:
        raise StateDomainError("slab start is closer to the state-domain boundary than kappa_guard")
    jet = compute_jet(law, bundle, m)
    compat = check_compatibility(law, bundle, m, jet=jet)
    compat_res = max((mx for _, _, mx in compat.per_order_residual), default=0.0)
    if seed is None:
        seed = jet_realizing_extension(jet, 2 * tau)
    else:
        for j, (a, b) in enumerate(zip(seed.jet(m - 1), jet.arrays())):
            if not np.allclose(a, b, rtol=1e-10, atol=1e-12):
                raise JetError(f"seed does not reproduce jet entry S_{j}")
    times = slab_times(law, bundle, tau, cfg.stepper)
    prev = seed.sample(times)
    hat: Trajectory | JetExtension = seed
    distances: list[float] = []
    warnings: list[str] = []
    increases = 0
    scale = None
    for k in range(1, cfg.max_iterations + 1):
        new = apply_phi(law, bundle, hat, tau, cfg.stepper)
        if law.state_independent:
            # coefficients ignore the iterate, so the first image is the fixed point
            distances.append(0.0)
            break
        if scale is None:
            # the iterates converge, so the first image fixes the scale of the relative distance
            scale = gm_norm(new, m - 1, cfg.gamma)
        d = _relative(gm_distance(new, prev, m - 1, cfg.gamma), scale)
        if not math.isfinite(d):
            raise PicardStalled(f"non-finite Picard distance at iteration {k}")
        distances.append(d)
        if cfg.radius_R is not None:
            r = gm_distance(new, seed.sample(times), m - 1, cfg.gamma)
            if r > cfg.radius_R:
                warnings.append(f"iterate {k} left the advisory ball (distance {r:.3e} > R)")
        if d <= cfg.fp_tolerance:
            break
        increases = increases + 1 if len(distances) > 1 and d > distances[-2] else 0
        if increases >= 3:
            raise PicardStalled(f"Picard distance grew for 3 consecutive iterations (last {d:.3e})")
        prev, hat = new, new
    else:
        raise PicardStalled(f"no convergence within {cfg.max_iterations} iterations (distance {distances[-1]:.3e})")
    ratio = _measured_ratio(distances, floor=1e-13)
    if ratio is not None and ratio > cfg.contraction_warn:
        warnings.append(f"measured contraction ratio {ratio:.3f} above {cfg.contraction_warn}")
    report = SlabReport(bundle.t0, float(new.t_end), len(distances), distances[-1], ratio, distances,
                        compat_res, warnings)
    for w in warnings:
        log.warning(w)
    return new, report


def blowup_monitor(state: FieldState, law: MaterialLaw, cfg: PicardConfig,
                   kappa: float | None = None) -> BlowupSignal | None:
    """Fires on a Lipschitz norm above threshold or a state closer than ``kappa`` to the domain boundary."""
    kappa = cfg.kappa_guard if kappa is None else kappa
    if kappa is not None and law.state_domain.kind != "all":
        dist = law.distance_to_state_boundary(state.values)
        if dist < kappa:
            return BlowupSignal("state_domain", state.time, dist)
    lip = lipschitz_norm(state)
    if lip > cfg.lipschitz_threshold:
        return BlowupSignal("lipschitz", state.time, lip)
    return None


def continue_maximal(law: MaterialLaw, bundle: DataBundle, m: int, cfg: PicardConfig,
                     horizon: float, sobolev_order: int | None = None,
                     progress: Callable[[SlabReport, FieldState], None] | None = None) -> SolveOutcome:
    """Chain Picard slabs from ``bundle.t0`` up to ``bundle.t0 + horizon`` or a termination event.

    ``progress`` is called after every accepted slab with its report and final state.
    """
    t_end = bundle.t0 + horizon
    kappa = cfg.kappa_guard
    if kappa is None and law.state_domain.kind != "all":
        kappa = 0.5 * law.distance_to_state_boundary(bundle.u0.values)
    sob_k = min(m, 3) if sobolev_order is None else sobolev_order
    diag: dict[str, list[float]] = {"t": [], "lipschitz": [], "sobolev": [], "state_distance": [],
                                    "compat_residual": []}
    traj: Trajectory | None = None
    per_slab: list[SlabReport] = []
    current = bundle
    tau = cfg.slab_width
    status, term_time, message = "horizon_reached", None, ""

    def record(state: FieldState):
        diag["t"].append(state.time)
        diag["lipschitz"].append(lipschitz_norm(state))
        diag["sobolev"].append(sobolev_norm(state, sob_k))
        diag["state_distance"].append(law.distance_to_state_boundary(state.values))

    record(bundle.u0)
    while current.t0 < t_end - 1e-12 * max(1.0, abs(t_end)):
        slab = None
        try:
            for halving in range(cfg.max_halvings + 1):
                width = min(tau, t_end - current.t0)
                try:
                    slab, rep = picard_slab(law, current, m, replace(cfg, kappa_guard=kappa), tau=width)
                    break
                except PicardStalled as exc:
                    message = str(exc)
                    tau /= 2
                    log.info("slab at t=%.6g stalled, halving tau to %.3g", current.t0, tau)
        except StateDomainError as exc:
            status, term_time, message = "left_state_domain", current.t0, str(exc)
            break
        except BlowUpError as exc:
            status, term_time, message = "nonfinite", exc.time, str(exc)
            break
        if slab is None:
            status, term_time = "picard_stalled", current.t0
            break
        per_slab.append(rep)
        diag["compat_residual"].append(rep.compat_residual)
        traj = slab if traj is None else traj.concatenate(slab)
        signal = None
        for i in range(1, len(slab)):
            signal = blowup_monitor(slab.state(i), law, cfg, kappa)
            if signal is not None:
                break
        record(slab.final)
        if progress is not None:
            progress(rep, slab.final)
        if signal is not None:
            status = "blowup_lipschitz" if signal.kind == "lipschitz" else "left_state_domain"
            term_time = signal.time
            message = f"{signal.kind} monitor fired at t={signal.time:.6g} (value {signal.value:.6g})"
            break
        if not np.all(np.isfinite(slab.final.values)):
            status, term_time = "nonfinite", slab.t_end
            break
        current = current.restarted(slab.final)
    return SolveOutcome(traj, status, per_slab, diag, term_time, message)


@dataclass
class ContractionResult:
    ratio: float | None  # None when the probes coincide
    numerator: float
    denominator: float

    @property
    def degenerate(self) -> bool:
        return self.ratio is None


def contraction_estimate(law: MaterialLaw, bundle: DataBundle, m: int, cfg: PicardConfig,
                         probe_pair: tuple[JetExtension, JetExtension], tau: float | None = None) -> ContractionResult:
    """``d(Phi p1, Phi p2) / d(p1, p2)`` in the G_{m-1, gamma} distance for probes sharing the jet."""
    tau = cfg.slab_width if tau is None else tau
    p1, p2 = probe_pair
    for j, (a, b) in enumerate(zip(p1.jet(m - 1), p2.jet(m - 1))):
        if not np.allclose(a, b, rtol=1e-12, atol=1e-14):
            raise JetError(f"probes differ in jet entry {j}; they must agree through order m-1")
    times = slab_times(law, bundle, tau, cfg.stepper)
    den = gm_distance(p1.sample(times), p2.sample(times), m - 1, cfg.gamma)
    if den == 0.0:
        return ContractionResult(None, 0.0, 0.0)
    q1 = apply_phi(law, bundle, p1, tau, cfg.stepper)
    q2 = apply_phi(law, bundle, p2, tau, cfg.stepper)
    num = gm_distance(q1, q2, m - 1, cfg.gamma)
    ratio = num / den
    if ratio > 0.5:
        log.warning("contraction ratio %.3f exceeds 1/2 at tau=%.3g", ratio, tau)
    return ContractionResult(ratio, num, den)


def probe_pair(law: MaterialLaw, bundle: DataBundle, m: int, tau: float, amplitude: float = 1.0):
    """Jet extension and a copy perturbed at order m by ``amplitude * u0``; both share the jet through m-1."""
    jet = compute_jet(law, bundle, m)
    base = jet_realizing_extension(jet, 2 * tau)
    scale = amplitude / max(tau, 1e-300) ** m
    return base, base.perturbed(m, scale * bundle.u0.values)


def pde_residual(law: MaterialLaw, traj: Trajectory, bundle: DataBundle, interior: bool = True) -> np.ndarray:
    """L2 norm of ``chi(u) d_t u + A(d) u + sigma(u) u - f`` at each stored level.

    ``d_t u`` is the stored stage derivative. With ``interior`` the boundary
    node layers (where the penalty terms act) are excluded.
    """
    if traj.derivs is None:
        raise ValueError("trajectory carries no time derivatives")
    grid = traj.grid
    x = grid.coords()
    w = grid.quadrature_weights()
    if interior:
        w = w.copy()
        for a in range(3):
            if not grid.periodic[a]:
                sl = [slice(None)] * 3
                sl[a] = 0
                w[tuple(sl)] = 0.0
                sl[a] = -1
                w[tuple(sl)] = 0.0
    out = []
    for i, t in enumerate(traj.times):
        u, du = traj.values[i], traj.derivs[i]
        r = _kernels.matvec(law.chi(u, x), du) + maxwell_operator(u, grid) + _kernels.matvec(law.sigma(u, x), u)
        r -= bundle.f_at(float(t))
        out.append(math.sqrt(float(np.sum(w * np.sum(r * r, axis=0)))))
    return np.array(out)
