"""Divergence bookkeeping, propagation cones and continuous-dependence sweeps."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .calculus import contract
from .grid import FieldState, GridSpec, discrete_div
from .initial_data import DataBundle, compute_jet, compatible_boundary_data
from .materials import MaterialLaw
from .norms import Trajectory, gm_distance, l2_norm, sobolev_norm
from .quasilinear import PicardConfig, SolveOutcome, continue_maximal
from .sources import SumSource, TaylorSource

SUM_SPECTRAL_NORMS = 3.0


class ConeConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ConeSpec:
    center: tuple[float, float, float]
    radius: float
    speed: float
    direction: str = "forward"  # or "backward"
    t0: float = 0.0

    def __post_init__(self):
        if not self.radius > 0 or not self.speed > 0:
            raise ValueError("cone radius and speed must be positive")
        if self.direction not in ("forward", "backward"):
            raise ValueError("direction must be 'forward' or 'backward'")

    def radius_at(self, t: float) -> float:
        s = t - self.t0
        return self.radius + self.speed * s if self.direction == "forward" else self.radius - self.speed * s


def propagation_speed_bound(law_or_eta) -> float:
    """``(1/eta) sum_j ||A_j||`` with each constant block of spectral norm 1."""
    eta = float(getattr(law_or_eta, "eta", law_or_eta))
    if not eta > 0:
        raise ValueError("eta must be positive")
    return SUM_SPECTRAL_NORMS / eta


def _distance_field(grid: GridSpec, center) -> np.ndarray:
    x1, x2, x3 = grid.coords()
    return np.sqrt((x1 - center[0]) ** 2 + (x2 - center[1]) ** 2 + (x3 - center[2]) ** 2)


@dataclass
class ConeReport:
    times: np.ndarray
    violation: np.ndarray  # max |u| over the checked node set at each time
    tolerance: float
    initial_violation: float

    @property
    def max_violation(self) -> float:
        return float(np.max(self.violation, initial=0.0))

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def _cone_mask(dist: np.ndarray, cone: ConeSpec, t: float, margin: float) -> np.ndarray:
    """Nodes where the theory forces ``u = 0``, shrunk by ``margin``."""
    r = cone.radius_at(t)
    if cone.direction == "forward":
        return dist > r + margin
    return dist < r - margin


def cone_support_check(traj: Trajectory, cone: ConeSpec, tolerance: float,
                       margin_cells: float = 1.0) -> ConeReport:
    """Max ``|u|`` over nodes strictly outside a forward cone (inside a backward one).

    Forward: data must be supported in the initial ball. Backward: data must vanish
    on it. Both are checked at the first level against ``tolerance``.
    """
    grid = traj.grid
    dist = _distance_field(grid, cone.center)
    margin = margin_cells * max(grid.spacing)
    amp = np.max(np.abs(traj.values[0]), axis=0)
    init_mask = _cone_mask(dist, cone, traj.t0, 0.0)
    if not init_mask.any():
        raise ConeConfigError("the checked node set is empty at the initial time")
    init_violation = float(np.max(amp[init_mask], initial=0.0))
    if init_violation > tolerance:
        raise ConeConfigError(f"initial data violate the cone hypothesis ({init_violation:.3e} > {tolerance:.1e})")
    viol = []
    for i, t in enumerate(traj.times):
        mask = _cone_mask(dist, cone, float(t), margin)
        if not mask.any():
            raise ConeConfigError(f"cone leaves the grid before t={t:.6g}")
        viol.append(float(np.max(np.abs(traj.values[i])[:, mask], initial=0.0)))
    return ConeReport(traj.times.copy(), np.array(viol), tolerance, init_violation)


def measured_front_speed(traj: Trajectory, center, level: float = 1e-4) -> float:
    """Slope of the radius of the ``level * max|u0|`` contour, fitted over the run."""
    dist = _distance_field(traj.grid, center)
    thresh = level * float(np.max(np.abs(traj.values[0])))
    radii = []
    for i in range(len(traj)):
        amp = np.max(np.abs(traj.values[i]), axis=0)
        radii.append(float(np.max(dist[amp > thresh], initial=0.0)))
    return float(np.polyfit(traj.times, radii, 1)[0])


@dataclass
class DivergenceReport:
    times: np.ndarray
    div_d_l2: np.ndarray  # ||div D - rho||
    div_d_max: np.ndarray
    div_b_l2: np.ndarray  # ||div B - magnetic source charge||
    div_b_max: np.ndarray
    rho: list[np.ndarray] = field(default_factory=list, repr=False)

    def drift(self, which: str = "d") -> float:
        """Largest excursion above the initial residual."""
        s = self.div_d_l2 if which == "d" else self.div_b_l2
        return float(np.max(s) - s[0])

    def drift_rate(self, which: str = "d") -> float:
        s = self.div_d_l2 if which == "d" else self.div_b_l2
        span = self.times[-1] - self.times[0]
        return float((s[-1] - s[0]) / span) if span > 0 else 0.0

    def growth_factor(self, which: str = "d") -> float:
        """``max_t residual / initial residual``."""
        s = self.div_d_l2 if which == "d" else self.div_b_l2
        return float(np.max(s) / s[0]) if s[0] > 0 else (0.0 if np.max(s) == 0 else math.inf)


def _current(law: MaterialLaw, u: np.ndarray, du: np.ndarray, x, f: np.ndarray, df: np.ndarray):
    """``J = (sigma(u) u)_E - f_E`` and its time derivative; likewise ``K = -f_H``."""
    sig = law.sigma(u, x)
    dsig = contract(law.sigma_tensor(u, 1, x), [du], n_lead=2)
    su = np.einsum("ij...,j...->i...", sig, u)
    dsu = np.einsum("ij...,j...->i...", dsig, u) + np.einsum("ij...,j...->i...", sig, du)
    return su - f, dsu - df


def divergence_check(traj: Trajectory, bundle: DataBundle, law: MaterialLaw) -> DivergenceReport:
    """Residuals of ``div D = rho`` and ``div B = 0`` along a trajectory.

    The charge follows ``rho(t) = rho(t0) - int div J`` with ``J`` the conduction
    current minus the electric source; the magnetic analogue integrates the
    magnetic source. The time integral uses the cubic Hermite rule on the stored
    levels and derivatives.
    """
    if traj.derivs is None:
        raise ValueError("divergence bookkeeping needs stored time derivatives")
    grid = traj.grid
    x = grid.coords()
    rho = np.array(bundle.charge_density(law), dtype=float)
    mag = np.zeros(grid.shape)
    t_prev, F_prev, dF_prev = None, None, None
    out = {k: [] for k in ("dl2", "dmax", "bl2", "bmax")}
    rhos = []
    for i, t in enumerate(traj.times):
        u, du = traj.values[i], traj.derivs[i]
        F, dF = _current(law, u, du, x, bundle.f_at(float(t)), bundle.f_at(float(t), 1))
        if t_prev is not None:
            h = t - t_prev
            integral = 0.5 * h * (F_prev + F) + (h * h / 12.0) * (dF_prev - dF)
            rho = rho - discrete_div(integral[:3], grid)
            mag = mag - discrete_div(integral[3:], grid)
        t_prev, F_prev, dF_prev = t, F, dF
        D = law.theta(u, x)
        rd = discrete_div(D[:3], grid) - rho
        rb = discrete_div(D[3:], grid) - mag
        out["dl2"].append(l2_norm(rd[None], grid))
        out["dmax"].append(float(np.max(np.abs(rd))))
        out["bl2"].append(l2_norm(rb[None], grid))
        out["bmax"].append(float(np.max(np.abs(rb))))
        rhos.append(rho)
    return DivergenceReport(traj.times.copy(), *(np.array(out[k]) for k in ("dl2", "dmax", "bl2", "bmax")), rhos)


def compatibility_corrected(law: MaterialLaw, bundle: DataBundle, v: np.ndarray, delta: float, m: int) -> DataBundle:
    """Data with ``u0 + delta v`` whose boundary data absorb the jet change through order m-1."""
    pert = bundle.with_u0(bundle.u0.values + delta * v)
    if not bundle.grid.has_pec or delta == 0.0:
        return pert
    base = compatible_boundary_data(compute_jet(law, bundle, m - 1))
    new = compatible_boundary_data(compute_jet(law, pert, m - 1))
    diff = TaylorSource(bundle.t0, [b - a for a, b in zip(base.coeffs, new.coeffs)])
    g = diff if bundle.g is None else SumSource(bundle.g, diff)
    return DataBundle(pert.t0, pert.u0, pert.f, g, pert.rho0)


@dataclass
class DependenceReport:
    deltas: list[float]
    differences: list[float]  # G_{m-1} distance to the unperturbed run
    ratios: list[float]  # difference / (delta * ||v||_{H^m})
    weighted_ratios: list[float]  # same with gamma-weighted distance
    v_norm: float
    aborted: str | None = None

    def spread(self) -> float:
        """``max ratio / min ratio - 1`` over the sweep."""
        r = [q for q in self.ratios if q > 0]
        return max(r) / min(r) - 1 if r else 0.0

    def successive(self) -> list[float]:
        return [a / b for a, b in zip(self.ratios, self.ratios[1:])]


def continuous_dependence_experiment(law: MaterialLaw, bundle: DataBundle, m: int, v: np.ndarray,
                                     deltas, cfg: PicardConfig, horizon: float, gamma: float = 1.0,
                                     base: SolveOutcome | None = None) -> DependenceReport:
    """Lipschitz ratios of the flow map in the G_{m-1} distance along direction ``v``."""
    deltas = [float(d) for d in deltas]
    v_norm = sobolev_norm(FieldState(bundle.grid, bundle.t0, v), min(m, 3))
    if base is None:
        base = continue_maximal(law, bundle, m, cfg, horizon)
    if base.status != "horizon_reached":
        return DependenceReport(deltas, [], [], [], v_norm, f"unperturbed run ended with {base.status}")
    diffs, ratios, wratios = [], [], []
    for d in deltas:
        if d == 0.0:
            diffs.append(0.0), ratios.append(0.0), wratios.append(0.0)
            continue
        run = continue_maximal(law, compatibility_corrected(law, bundle, v, d, m), m, cfg, horizon)
        if run.status != "horizon_reached":
            return DependenceReport(deltas, diffs, ratios, wratios, v_norm, f"delta={d:g} run ended with {run.status}")
        if run.trajectory.times.shape != base.trajectory.times.shape:
            return DependenceReport(deltas, diffs, ratios, wratios, v_norm, f"delta={d:g} used a different slab structure")
        diff = gm_distance(run.trajectory, base.trajectory, m - 1)
        wdiff = gm_distance(run.trajectory, base.trajectory, m - 1, gamma)
        diffs.append(diff)
        ratios.append(diff / (abs(d) * v_norm))
        wratios.append(wdiff / (abs(d) * v_norm))
    return DependenceReport(deltas, diffs, ratios, wratios, v_norm)
