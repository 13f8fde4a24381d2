"""Method-of-lines solver for the frozen-coefficient linear problem.

    A0 d_t u + sum_j A_j^co d_j u + D u = f,    B u = g on the conducting face.

The boundary condition is imposed weakly: at the conducting face the
residual receives ``-tau C^T (B u - g) / h3`` where ``C`` is the companion
matrix with ``A3 = (C^T B + B^T C) / 2``. With ``tau = 1`` this cancels the
boundary energy flux of the trapezoid-weighted energy. Open faces receive an
absorbing penalty on their incoming characteristics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import _kernels
from .grid import A_CO, FieldState, GridSpec, boundary_matrix, maxwell_operator
from .initial_data import DataBundle, JetExtension
from .materials import MaterialLaw
from .norms import Trajectory, face_l2_norm, l2_norm

SUM_SPECTRAL_NORMS = 3.0  # each A_j^co has singular values 1, 1, 1, 1, 0, 0


class BlowUpError(RuntimeError):
    """Non-finite values appeared during time stepping."""

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


class CFLError(ValueError):
    pass


@dataclass(frozen=True)
class BoundaryOperators:
    B3: np.ndarray  # 3x6 with a zero row
    Bmat: np.ndarray  # 2x6
    Cmat: np.ndarray  # 2x6
    A3: np.ndarray  # 6x6


def build_boundary_operators(nu=(0.0, 0.0, -1.0)) -> BoundaryOperators:
    """B, C and A3 for the conducting bottom face (outer normal ``(0, 0, -1)``)."""
    if tuple(float(v) for v in nu) != (0.0, 0.0, -1.0):
        raise ValueError(f"unsupported normal {tuple(nu)}: only the bottom face (0, 0, -1) is implemented")
    B3 = boundary_matrix(nu)
    Bi = B3[:2].astype(int)
    Ci = np.zeros((2, 6), dtype=int)
    Ci[0, 3] = 2
    Ci[1, 4] = 2
    A3i = A_CO[2].astype(int)
    if not np.array_equal(Ci.T @ Bi + Bi.T @ Ci, 2 * A3i):
        raise AssertionError("splitting identity for A3 failed")
    return BoundaryOperators(B3, Bi.astype(float), Ci.astype(float), A3i.astype(float))


@dataclass(frozen=True)
class StepperConfig:
    cfl: float = 0.5
    penalty_strength: float = 1.0
    rk_stages: int = 4
    dissipation_coeff: float = 0.02
    dt: float | None = None  # fixed step overriding the CFL rule
    absorbing_open_faces: bool = True

    def __post_init__(self):
        if not 0 < self.cfl <= 1:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if self.penalty_strength < 1:
            raise ValueError(f"penalty_strength must be >= 1, got {self.penalty_strength}")
        if self.rk_stages != 4:
            raise ValueError("only the classical four-stage scheme is available")
        if self.dissipation_coeff < 0:
            raise ValueError("dissipation_coeff must be nonnegative")
        if self.dt is not None and not self.dt > 0:
            raise ValueError("dt must be positive")

    def dt_max(self, grid: GridSpec, eta: float) -> float:
        return self.cfl * min(grid.spacing) * eta / SUM_SPECTRAL_NORMS


def _matrix_field(M: np.ndarray, grid: GridSpec) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 2:
        return M
    return np.ascontiguousarray(M)


def _nonzero_or_none(M: np.ndarray) -> np.ndarray | None:
    return np.ascontiguousarray(M) if np.any(M) else None


def _collapse(M: np.ndarray) -> np.ndarray:
    """A spatially uniform matrix field as a single 6x6 matrix."""
    M = np.asarray(M, dtype=float)
    first = M[..., 0, 0, 0]
    if np.array_equal(M, np.broadcast_to(first[..., None, None, None], M.shape)):
        return np.ascontiguousarray(first)
    return np.ascontiguousarray(M)


class FrozenCoefficients:
    """``A0(t)`` and ``D(t)`` as 6x6 constants or fields of shape (6, 6, *grid)."""

    def __init__(self, sampler: Callable[[float], tuple[np.ndarray, np.ndarray]], eta_floor: float,
                 time_independent: bool = False):
        self._sampler = sampler
        self.eta_floor = float(eta_floor)
        self.time_independent = time_independent
        self._cache: dict[float, tuple[np.ndarray, np.ndarray]] = {}

    @classmethod
    def constant(cls, A0, D, eta_floor: float | None = None) -> "FrozenCoefficients":
        A0 = np.asarray(A0, dtype=float)
        D = np.asarray(D, dtype=float)
        if eta_floor is None:
            Am = A0 if A0.ndim == 2 else np.moveaxis(A0.reshape(6, 6, -1), -1, 0)
            eta_floor = float(np.min(np.linalg.eigvalsh(Am)))
        pair = (_matrix_field(A0, None), _nonzero_or_none(_matrix_field(D, None)))
        out = cls(lambda t: pair, eta_floor, time_independent=True)
        out.check()
        return out

    @classmethod
    def from_law(cls, law: MaterialLaw, grid: GridSpec, hat: Trajectory | JetExtension) -> "FrozenCoefficients":
        """``A0 = chi(hat u(t))`` and ``D = sigma(hat u(t))``.

        Trajectories are interpolated by cubic Hermite polynomials at stage times.
        """
        x = grid.coords()
        if law.state_independent:
            y = grid.zeros()
            pair = (_collapse(law.chi(y, x)), _nonzero_or_none(_collapse(law.sigma(y, x))))
            return cls(lambda t: pair, law.eta, time_independent=True)

        def sample(t: float):
            if isinstance(hat, Trajectory):
                y = hat.interpolate(t)[0]
            else:
                y = hat.value(t)
            return np.ascontiguousarray(law.chi(y, x)), _nonzero_or_none(law.sigma(y, x))

        return cls(sample, law.eta)

    def at(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        if self.time_independent:
            return self._sampler(t)
        key = round(float(t), 14)
        hit = self._cache.get(key)
        if hit is None:
            if len(self._cache) > 8:
                self._cache.clear()
            hit = self._cache[key] = self._sampler(t)
        return hit

    def check(self, t: float = 0.0, samples: int = 64, rng: np.random.Generator | None = None):
        """Sampled symmetry and eigenvalue-floor check of ``A0``."""
        A0, _ = self.at(t)
        if A0.ndim == 2:
            mats = A0[None]
        else:
            flat = np.moveaxis(A0.reshape(6, 6, -1), -1, 0)
            rng = rng or np.random.default_rng(0)
            mats = flat[rng.integers(0, flat.shape[0], size=min(samples, flat.shape[0]))]
        asym = np.max(np.abs(mats - np.swapaxes(mats, 1, 2)))
        scale = max(1.0, float(np.max(np.abs(mats))))
        if asym > 1e-10 * scale:
            raise ValueError(f"A0 is not symmetric (asymmetry {asym:.2e})")
        lam = float(np.min(np.linalg.eigvalsh(mats)))
        if lam < self.eta_floor - 1e-10:
            raise ValueError(f"A0 eigenvalue {lam} below floor {self.eta_floor}")


@dataclass
class LinearProblem:
    coeffs: FrozenCoefficients
    data: DataBundle
    horizon: float

    @property
    def grid(self) -> GridSpec:
        return self.data.grid

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.data.g is not None and not self.grid.has_pec:
            raise ValueError("boundary data given but the grid has no conducting face")


def _open_face_penalties(grid: GridSpec, cfg: StepperConfig):
    """List of (axis, face index, 6x6 matrix) with matrix = (2/h) A(nu)^-."""
    out = []
    if not cfg.absorbing_open_faces:
        return out
    for a in range(3):
        mode = grid.boundary[a]
        if mode == "periodic":
            continue
        faces = [("top", 1.0)] if mode == "pec_bottom_open_top" else [("bottom", -1.0), ("top", 1.0)]
        for which, sign in faces:
            An = sign * A_CO[a]
            Aminus = 0.5 * (An - An @ An)
            idx = 0 if which == "bottom" else grid.shape[a] - 1
            out.append((a, idx, (2.0 / grid.spacing[a]) * Aminus))
    return out


def _face_view(arr: np.ndarray, axis: int, idx: int) -> np.ndarray:
    sl = [slice(None)] * arr.ndim
    sl[arr.ndim - 3 + axis] = idx
    return arr[tuple(sl)]


def spatial_residual(u: np.ndarray, A0: np.ndarray, D: np.ndarray | None, f: np.ndarray | None, g: np.ndarray | None,
                     grid: GridSpec, ops: BoundaryOperators, cfg: StepperConfig) -> np.ndarray:
    """Semi-discrete ``d_t u`` including boundary penalties and optional dissipation.

    ``D = None`` means no zeroth-order term.
    """
    rhs = -maxwell_operator(u, grid)
    if f is not None:
        rhs += f
    if D is not None:
        rhs -= _kernels.matvec(D, u)
    if grid.has_pec:
        face = u[:, :, :, 0]
        mismatch = np.tensordot(ops.Bmat, face, axes=(1, 0))
        if g is not None:
            mismatch = mismatch - g[:2]
        # C^T part cancels the face flux; any strength above 1 goes into a
        # B^T part, which only removes energy
        pen = ops.Cmat.T + (cfg.penalty_strength - 1.0) * ops.Bmat.T
        rhs[:, :, :, 0] -= np.tensordot(pen, mismatch, axes=(1, 0)) / grid.spacing[2]
    for axis, idx, P in _open_face_penalties(grid, cfg):
        fv = _face_view(rhs, axis, idx)
        fv += np.tensordot(P, _face_view(u, axis, idx), axes=(1, 0))
    du = _kernels.spd_solve(A0, rhs)
    if cfg.dissipation_coeff > 0:
        for a in range(3):
            if grid.cells[a] >= 4:
                du -= (cfg.dissipation_coeff / grid.spacing[a]) * _kernels.fourth_difference(u, u.ndim - 3 + a, grid.periodic[a])
    return du


def pec_face_power(u: np.ndarray, g: np.ndarray | None, grid: GridSpec, ops: BoundaryOperators,
                   cfg: StepperConfig) -> float:
    """Net energy flux through the conducting face after the penalty.

    ``<Cu, Bu> - <Cu, Bu - g> - (tau - 1) <Bu, Bu - g>``, which is ``-(tau - 1)|Bu|^2 <= 0`` for ``g = 0``.
    """
    face = u[:, :, :, 0]
    Cu = np.tensordot(ops.Cmat, face, axes=(1, 0))
    Bu = np.tensordot(ops.Bmat, face, axes=(1, 0))
    gg = 0.0 if g is None else g[:2]
    w = grid.face_weights()
    mis = Bu - gg
    flux = np.sum(Cu * Bu, axis=0) - np.sum(Cu * mis, axis=0) - (cfg.penalty_strength - 1.0) * np.sum(Bu * mis, axis=0)
    return float(np.sum(w * flux))


def weighted_energy(u: np.ndarray, A0: np.ndarray, grid: GridSpec) -> float:
    """``sum_nodes w u^T A0 u`` with trapezoid weights."""
    return float(np.sum(grid.quadrature_weights() * np.sum(u * _kernels.matvec(A0, u), axis=0)))


class _RHS:
    def __init__(self, problem: LinearProblem, cfg: StepperConfig, ops: BoundaryOperators):
        self.p, self.cfg, self.ops = problem, cfg, ops
        self.grid = problem.grid
        self.has_f = problem.data.f is not None
        self.has_g = problem.data.g is not None

    def __call__(self, t: float, u: np.ndarray) -> np.ndarray:
        A0, D = self.p.coeffs.at(t)
        f = self.p.data.f_at(t) if self.has_f else None
        g = self.p.data.g_at(t) if self.has_g else None
        return spatial_residual(u, A0, D, f, g, self.grid, self.ops, self.cfg)


def step(state: FieldState, t: float, dt: float, problem: LinearProblem, cfg: StepperConfig,
         ops: BoundaryOperators | None = None, k1: np.ndarray | None = None) -> tuple[FieldState, np.ndarray]:
    """One classical RK4 step. Returns the new state and the stage-1 derivative at ``t``."""
    dt_cap = cfg.dt_max(problem.grid, problem.coeffs.eta_floor)
    if cfg.dt is None and dt > dt_cap * (1 + 1e-12):
        raise CFLError(f"dt={dt} exceeds the CFL bound {dt_cap}")
    ops = ops or build_boundary_operators(problem.grid.pec_normal)
    F = _RHS(problem, cfg, ops)
    u = state.values
    # non-finite values are reported below as a blow-up, not as warnings
    with np.errstate(invalid="ignore", over="ignore"):
        if k1 is None:
            k1 = F(t, u)
        k2 = F(t + dt / 2, u + (dt / 2) * k1)
        k3 = F(t + dt / 2, u + (dt / 2) * k2)
        k4 = F(t + dt, u + dt * k3)
        new = u + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise BlowUpError(f"non-finite values at t={t + dt:.6g}", t + dt)
    return FieldState(state.grid, t + dt, new), k1


@dataclass
class EnergyRecord:
    t: list[float] = field(default_factory=list)
    energy: list[float] = field(default_factory=list)
    source_norm: list[float] = field(default_factory=list)
    boundary_norm: list[float] = field(default_factory=list)
    ratio: list[float] = field(default_factory=list)  # energy[n] / energy[n-1]

    def append(self, t, energy, source_norm, boundary_norm):
        prev = self.energy[-1] if self.energy else None
        self.t.append(float(t))
        self.energy.append(float(energy))
        self.source_norm.append(float(source_norm))
        self.boundary_norm.append(float(boundary_norm))
        self.ratio.append(float(energy / prev) if prev else 1.0)

    def growth_constant(self) -> float:
        """``max_n (E_n / E_{n-1} - 1) / dt_n``; nonpositive when the energy never grows."""
        t = np.asarray(self.t)
        r = np.asarray(self.ratio)
        if len(t) < 2:
            return 0.0
        return float(np.max((r[1:] - 1.0) / np.diff(t)))

    def to_csv(self) -> str:
        rows = ["t,energy,source_norm,boundary_norm,ratio"]
        for row in zip(self.t, self.energy, self.source_norm, self.boundary_norm, self.ratio):
            rows.append(",".join(f"{v:.17g}" for v in row))
        return "\n".join(rows) + "\n"


@dataclass
class LinearSolution:
    trajectory: Trajectory
    energy: EnergyRecord
    dt: float
    steps: int


def plan_steps(horizon: float, grid: GridSpec, eta: float, cfg: StepperConfig) -> tuple[int, float]:
    """Number of equal steps covering ``horizon`` and their size.

    At least two steps are taken so that second time derivatives of the
    result can be formed by finite differences.
    """
    dt_max = cfg.dt if cfg.dt is not None else cfg.dt_max(grid, eta)
    n = max(2, math.ceil(horizon / dt_max - 1e-9))
    return n, horizon / n


def solve_linear(problem: LinearProblem, cfg: StepperConfig, store: bool | int = True,
                 record_energy: bool = True) -> LinearSolution:
    """Integrate over ``[t0, t0 + horizon]``.

    ``store=True`` keeps every level, an integer ``k`` keeps every k-th level
    (plus the last), ``False`` keeps only the endpoints. Each stored level
    carries its time derivative.
    """
    grid = problem.grid
    ops = build_boundary_operators(grid.pec_normal)
    n, dt = plan_steps(problem.horizon, grid, problem.coeffs.eta_floor, cfg)
    every = 1 if store is True else (n if store is False else int(store))
    F = _RHS(problem, cfg, ops)
    state = problem.data.u0
    t0 = problem.data.t0
    times, vals, ders = [], [], []
    energy = EnergyRecord()
    k1 = None
    for i in range(n + 1):
        t = t0 + i * dt
        if k1 is None:
            k1 = F(t, state.values)
        if i % every == 0 or i == n:
            times.append(t)
            vals.append(state.values)
            ders.append(k1)
        if record_energy:
            A0, _ = problem.coeffs.at(t)
            energy.append(
                t,
                weighted_energy(state.values, A0, grid),
                l2_norm(problem.data.f_at(t), grid) if problem.data.f is not None else 0.0,
                face_l2_norm(problem.data.g_at(t), grid) if problem.data.g is not None else 0.0,
            )
        if i == n:
            break
        state, _ = step(FieldState(grid, t, state.values), t, dt, problem, cfg, ops, k1=k1)
        k1 = None
    traj = Trajectory(grid, np.array(times), np.stack(vals), np.stack(ders))
    return LinearSolution(traj, energy, dt, n)
