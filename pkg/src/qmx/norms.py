"""Trajectories and discrete surrogates of the H^k, W^{1,inf} and G_{m,gamma} norms."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .grid import FieldState, GridError, GridSpec, discrete_partial

MAX_SOBOLEV_ORDER = 3


class TimeResolutionError(ValueError):
    pass


@dataclass
class Trajectory:
    """Time levels of a solution with optional stored first time derivatives.

    ``values`` and ``derivs`` have shape ``(nt, 6, *grid.shape)``. Higher time
    derivatives fall back to finite differences in time.
    """

    grid: GridSpec
    times: np.ndarray
    values: np.ndarray = field(repr=False)
    derivs: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values)
        if self.values.shape[0] != self.times.shape[0]:
            raise ValueError("one value array per time level required")
        if self.derivs is not None and self.derivs.shape != self.values.shape:
            raise ValueError("derivs must match values")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def state(self, i: int) -> FieldState:
        return FieldState(self.grid, float(self.times[i]), self.values[i])

    @property
    def final(self) -> FieldState:
        return self.state(-1)

    def time_derivative(self, j: int) -> np.ndarray:
        """``d^j/dt^j`` at every level: stored derivative for j=1, finite differences beyond."""
        if j == 0:
            return self.values
        if self.derivs is not None:
            base, done = self.derivs, 1
        else:
            base, done = self.values, 0
        for _ in range(j - done):
            if len(self.times) < 3:
                raise TimeResolutionError("need at least 3 time levels for finite differences in t")
            base = np.gradient(base, self.times, axis=0, edge_order=2)
        return base

    def interpolate(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Value and time derivative at ``t`` by cubic Hermite interpolation."""
        if self.derivs is None:
            raise ValueError("Hermite interpolation needs stored derivatives")
        times = self.times
        tol = 1e-12 * max(1.0, abs(times[-1]))
        if t < times[0] - tol or t > times[-1] + tol:
            raise ValueError(f"t={t} outside trajectory [{times[0]}, {times[-1]}]")
        i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        t0, t1 = times[i], times[i + 1]
        dt = t1 - t0
        s = (t - t0) / dt
        if abs(s) < 1e-13:
            return self.values[i], self.derivs[i]
        if abs(s - 1) < 1e-13:
            return self.values[i + 1], self.derivs[i + 1]
        y0, y1 = self.values[i], self.values[i + 1]
        d0, d1 = self.derivs[i], self.derivs[i + 1]
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        val = h00 * y0 + h10 * dt * d0 + h01 * y1 + h11 * dt * d1
        g00 = (6 * s**2 - 6 * s) / dt
        g10 = 3 * s**2 - 4 * s + 1
        g01 = (-6 * s**2 + 6 * s) / dt
        g11 = 3 * s**2 - 2 * s
        der = g00 * y0 + g10 * d0 + g01 * y1 + g11 * d1
        return val, der

    def concatenate(self, other: "Trajectory") -> "Trajectory":
        """Append ``other``, whose first level must coincide with this trajectory's last."""
        if abs(other.times[0] - self.times[-1]) > 1e-12 * max(1.0, abs(self.times[-1])):
            raise ValueError("trajectories do not touch")
        derivs = None
        if self.derivs is not None and other.derivs is not None:
            derivs = np.concatenate([self.derivs[:-1], other.derivs])
        return Trajectory(
            self.grid,
            np.concatenate([self.times[:-1], other.times]),
            np.concatenate([self.values[:-1], other.values]),
            derivs,
        )

    @classmethod
    def constant(cls, state: FieldState, times) -> "Trajectory":
        times = np.asarray(times, dtype=float)
        vals = np.broadcast_to(state.values, (len(times),) + state.values.shape).copy()
        return cls(state.grid, times, vals, np.zeros_like(vals))


def multi_indices(order: int) -> list[tuple[int, int, int]]:
    """Spatial multi-indices of exactly ``order``, in lexicographic order."""
    return [b for b in itertools.product(range(order + 1), repeat=3) if sum(b) == order]


def spatial_derivatives(values: np.ndarray, grid: GridSpec, k: int) -> dict[tuple[int, int, int], np.ndarray]:
    """All discrete derivatives ``D^beta values`` with ``|beta| <= k``.

    Each is built by applying one more partial to a lower-order entry, so the
    composition order is fixed (axis 1 first, then 2, then 3).
    """
    out = {(0, 0, 0): values}
    for order in range(1, k + 1):
        for beta in multi_indices(order):
            last = max(a for a in range(3) if beta[a] > 0)
            parent = list(beta)
            parent[last] -= 1
            out[beta] = discrete_partial(out[tuple(parent)], last + 1, grid)
    return out


def _l2sq(values: np.ndarray, weights: np.ndarray) -> float:
    flat = values.reshape((-1, weights.size))
    if np.iscomplexobj(flat):
        flat = np.abs(flat)
    return float(np.einsum("cn,cn,n->", flat, flat, weights.ravel()))


def sobolev_norm_values(values: np.ndarray, grid: GridSpec, k: int) -> float:
    if not 0 <= k <= MAX_SOBOLEV_ORDER:
        raise GridError(f"Sobolev order {k} unsupported (0..{MAX_SOBOLEV_ORDER})")
    if k > 0:
        for a in range(3):
            if grid.cells[a] < 3:
                raise GridError("grid too small for derivative stencils")
    w = grid.quadrature_weights()
    total = sum(_l2sq(d, w) for d in spatial_derivatives(values, grid, k).values())
    return float(np.sqrt(total))


def sobolev_norm(state: FieldState, k: int) -> float:
    """Discrete H^k norm: root of the weighted sum of squares of all derivatives up to order k."""
    return sobolev_norm_values(state.values, state.grid, k)


def l2_norm(values: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(_l2sq(values, grid.quadrature_weights())))


def face_l2_norm(values: np.ndarray, grid: GridSpec) -> float:
    w = grid.face_weights()
    return float(np.sqrt(np.sum(w * np.sum(np.abs(values) ** 2, axis=0))))


def face_sobolev_norm(values: np.ndarray, grid: GridSpec, k: int) -> float:
    """H^k-like norm of a face function ``(c, n1, n2)`` using tangential derivatives only."""
    w = grid.face_weights()
    derivs = {(0, 0): np.asarray(values, dtype=float)}
    for order in range(1, k + 1):
        for b1 in range(order, -1, -1):
            b = (b1, order - b1)
            axis = 0 if b1 > 0 else 1
            parent = (b1 - 1, b[1]) if axis == 0 else (b1, b[1] - 1)
            f = derivs[parent]
            derivs[b] = _kernels.diff_axis(f, f.ndim - 2 + axis, grid.spacing[axis], grid.periodic[axis])
    return float(np.sqrt(sum(float(np.sum(w * np.sum(d * d, axis=0))) for d in derivs.values())))


def boundary_data_norm(g, times, m: int, grid: GridSpec) -> float:
    """Computable stand-in for the fractional boundary norm of ``g``.

    ``max_{j<=m}`` of the L2-in-time norm of ``||d_t^j g(t)||`` in the face norm of
    order ``m - j + 1``: one tangential derivative more than the interior count,
    in place of the half derivative. ``g(t, j)`` returns ``d_t^j g`` on the face.
    """
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        raise TimeResolutionError("boundary norm needs at least two time levels")
    best = 0.0
    for j in range(m + 1):
        sq = np.array([face_sobolev_norm(g(float(t), j), grid, m - j + 1) ** 2 for t in times])
        best = max(best, float(np.sqrt(np.trapezoid(sq, times))))
    return best


def lipschitz_norm_values(values: np.ndarray, grid: GridSpec) -> float:
    m = float(np.max(np.abs(values))) if values.size else 0.0
    for j in (1, 2, 3):
        if grid.cells[j - 1] >= 3:
            m = max(m, float(np.max(np.abs(discrete_partial(values, j, grid)))))
    return m


def lipschitz_norm(state: FieldState) -> float:
    """Discrete W^{1,inf}: max of |u| and of all first partials over nodes and components."""
    return lipschitz_norm_values(state.values, state.grid)


def gm_norm(traj: Trajectory, m: int, gamma: float = 0.0) -> float:
    """``max_{j<=m} sup_t exp(-gamma t) ||d_t^j u(t)||_{H^{m-j}}`` over stored levels."""
    if len(traj) < m + 1:
        raise TimeResolutionError(f"G_{m} norm needs at least {m + 1} time levels, got {len(traj)}")
    weights = np.exp(-gamma * traj.times)
    best = 0.0
    for j in range(m + 1):
        dj = traj.time_derivative(j)
        for n in range(len(traj)):
            best = max(best, weights[n] * sobolev_norm_values(dj[n], traj.grid, m - j))
    return best


def gm_distance(a: Trajectory, b: Trajectory, m: int, gamma: float = 0.0) -> float:
    """G_{m,gamma} norm of ``a - b`` for trajectories on identical time levels."""
    if a.times.shape != b.times.shape or np.max(np.abs(a.times - b.times), initial=0.0) > 1e-12:
        raise ValueError("trajectories must share time levels")
    da = None if a.derivs is None or b.derivs is None else a.derivs - b.derivs
    return gm_norm(Trajectory(a.grid, a.times, a.values - b.values, da), m, gamma)


@dataclass
class NormReport:
    sobolev_orders: dict[int, float]
    lipschitz: float
    gm: dict[tuple[int, float], float]


def norm_report(traj: Trajectory, orders=(0, 1, 2, 3), gms=((0, 0.0),)) -> NormReport:
    final = traj.final
    return NormReport(
        {k: sobolev_norm(final, k) for k in orders},
        lipschitz_norm(final),
        {(m, g): gm_norm(traj, m, g) for m, g in gms},
    )
