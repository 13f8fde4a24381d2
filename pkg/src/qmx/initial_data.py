"""Data bundles, initial jets, compatibility conditions and jet-realizing extensions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .calculus import MultiIndex, contract, enumerate_terms
from .grid import FieldState, GridSpec, apply_boundary_matrix, boundary_matrix, discrete_div, maxwell_operator, pec_face
from .materials import MaterialLaw, StateDomainError
from .norms import Trajectory, face_l2_norm, l2_norm
from .sources import TaylorSource, TimeSource


class JetError(ValueError):
    pass


@dataclass
class DataBundle:
    """Source ``f``, boundary data ``g``, initial value ``u0`` and initial charge at ``t0``.

    ``f`` and ``g`` are time-analytic suppliers (``None`` means zero). ``rho0``
    is an array or ``"derived"`` (the discrete divergence of ``D(u0)``).
    """

    t0: float
    u0: FieldState
    f: TimeSource | None = None
    g: TimeSource | None = None
    rho0: np.ndarray | str = "derived"

    @property
    def grid(self) -> GridSpec:
        return self.u0.grid

    def f_at(self, t: float, j: int = 0) -> np.ndarray:
        if self.f is None:
            return np.zeros((6,) + self.grid.shape)
        return self.f(t, j)

    def g_at(self, t: float, j: int = 0) -> np.ndarray:
        if self.g is None:
            return np.zeros((3,) + self.grid.shape[:2])
        return self.g(t, j)

    def restarted(self, u: FieldState) -> "DataBundle":
        """Same sources, new initial time and value."""
        return DataBundle(u.time, u, self.f, self.g, "derived")

    def with_u0(self, values: np.ndarray) -> "DataBundle":
        return DataBundle(self.t0, self.u0.with_values(values), self.f, self.g, self.rho0)

    def charge_density(self, law: MaterialLaw) -> np.ndarray:
        if isinstance(self.rho0, str):
            if self.rho0 != "derived":
                raise ValueError(f"rho0 must be an array or 'derived', got {self.rho0!r}")
            D = law.theta(self.u0.values, self.grid.coords())[:3]
            return discrete_div(D, self.grid)
        return np.asarray(self.rho0)


@dataclass
class InitialJet:
    """``S_0, ..., S_m``: the time derivatives of the solution at ``t0``."""

    entries: list[FieldState]

    @property
    def order(self) -> int:
        return len(self.entries) - 1

    @property
    def t0(self) -> float:
        return self.entries[0].time

    @property
    def grid(self) -> GridSpec:
        return self.entries[0].grid

    def arrays(self) -> list[np.ndarray]:
        return [e.values for e in self.entries]

    def __getitem__(self, p: int) -> np.ndarray:
        return self.entries[p].values


def compute_Mkp(law: MaterialLaw, u0: FieldState, jet_prefix, k: int, p: int) -> np.ndarray:
    """``d_t^p [theta_k(u)](t0)`` with ``theta_1 = chi`` and ``theta_2 = sigma``, shape (6, 6, *g).

    ``jet_prefix`` holds at least ``S_0..S_p`` (arrays or FieldStates).
    """
    if k not in (1, 2):
        raise ValueError("k must be 1 (chi) or 2 (sigma)")
    S = [getattr(s, "values", s) for s in jet_prefix]
    x = u0.grid.coords()
    y = u0.values
    if p == 0:
        return law.chi(y, x) if k == 1 else law.sigma(y, x)
    if len(S) < p + 1:
        raise JetError(f"M_{k}^{p} needs S_0..S_{p}, got {len(S)} entries")
    tensor = law.chi_tensor if k == 1 else law.sigma_tensor
    acc = None
    for term in enumerate_terms(MultiIndex(p)):
        T = tensor(y, term.j, x)
        val = term.coefficient * contract(T, [S[g.t] for g in term.gammas], n_lead=2)
        acc = val if acc is None else acc + val
    return acc


def _as_matrix_field(M, grid: GridSpec) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.ndim == 2:
        M = M.reshape((6, 6, 1, 1, 1))
    return np.ascontiguousarray(np.broadcast_to(M, (6, 6) + grid.shape))


def compute_jet(law: MaterialLaw, bundle: DataBundle, m: int, frozen: tuple | None = None) -> InitialJet:
    """Initial jet by the recursion over p = 1..m.

    With ``frozen = (chi0, sigma0)`` the coefficients are treated as given
    state-independent matrices (all M-terms of order >= 1 vanish), which is the
    linear recursion.
    """
    u0 = bundle.u0
    grid = u0.grid
    t0 = bundle.t0
    y = u0.values
    if not law.state_domain.contains(y) and law.state_domain.kind != "all":
        raise StateDomainError("u0 is outside the admissible state domain")
    if frozen is None:
        chi0 = law.chi(y, grid.coords())
    else:
        chi0 = _as_matrix_field(frozen[0], grid)
    S = [y]
    M1: dict[int, np.ndarray] = {}
    M2: dict[int, np.ndarray] = {}
    for p in range(1, m + 1):
        rhs = bundle.f_at(t0, p - 1) - maxwell_operator(S[p - 1], grid)
        for l in range(1, p):
            if l not in M1:
                M1[l] = np.zeros((6, 6) + grid.shape) if frozen is not None else compute_Mkp(law, u0, S, 1, l)
            rhs = rhs - math.comb(p - 1, l) * _kernels.matvec(M1[l], S[p - l])
        for l in range(0, p):
            if l not in M2:
                if frozen is not None:
                    M2[l] = _as_matrix_field(frozen[1] if l == 0 else np.zeros((6, 6)), grid)
                else:
                    M2[l] = compute_Mkp(law, u0, S, 2, l)
            rhs = rhs - math.comb(p - 1, l) * _kernels.matvec(M2[l], S[p - 1 - l])
        try:
            Sp = _kernels.spd_solve(np.ascontiguousarray(chi0), rhs)
        except np.linalg.LinAlgError as exc:
            raise JetError("chi(u0) is not positive definite") from exc
        S.append(Sp)
    return InitialJet([FieldState(grid, t0, s) for s in S])


@dataclass
class CompatibilityReport:
    """Residuals ``B S_p - d_t^p g(t0)`` on the conducting face for p = 0..m-1."""

    per_order_residual: list[tuple[int, float, float]]  # (p, face L2, max)
    tolerance: float
    rho_mismatch: float | None = None

    @property
    def passed(self) -> bool:
        return all(mx <= self.tolerance for _, _, mx in self.per_order_residual)

    # alias under the reporting field name
    @property
    def pass_(self) -> bool:
        return self.passed

    def max_residual(self, p: int) -> float:
        return dict((q, mx) for q, _, mx in self.per_order_residual)[p]

    def table(self) -> str:
        lines = [f"{'p':>2}  {'face L2':>12}  {'max':>12}"]
        for p, l2, mx in self.per_order_residual:
            lines.append(f"{p:>2}  {l2:12.4e}  {mx:12.4e}")
        lines.append(f"tolerance {self.tolerance:.1e}: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        rows = ["p,face_l2,max"] + [f"{p},{l2:.17g},{mx:.17g}" for p, l2, mx in self.per_order_residual]
        return "\n".join(rows) + "\n"


def check_compatibility(law: MaterialLaw, bundle: DataBundle, m: int, tolerance: float = 1e-10,
                        jet: InitialJet | None = None) -> CompatibilityReport:
    grid = bundle.grid
    rho_mismatch = None
    if not isinstance(bundle.rho0, str):
        D = law.theta(bundle.u0.values, grid.coords())[:3]
        rho_mismatch = l2_norm((discrete_div(D, grid) - bundle.rho0)[None], grid)
    if not grid.has_pec or m < 1:
        return CompatibilityReport([], tolerance, rho_mismatch)
    if jet is None or jet.order < m - 1:
        jet = compute_jet(law, bundle, m - 1)
    B = boundary_matrix(grid.pec_normal)
    rows = []
    for p in range(m):
        r = apply_boundary_matrix(B, pec_face(jet[p])) - bundle.g_at(bundle.t0, p)
        rows.append((p, face_l2_norm(r, grid), float(np.max(np.abs(r)))))
    return CompatibilityReport(rows, tolerance, rho_mismatch)


def compatible_boundary_data(jet: InitialJet) -> TaylorSource:
    """Boundary data ``g(t) = sum_p B S_p|face (t - t0)^p / p!``, compatible by construction."""
    B = boundary_matrix(jet.grid.pec_normal)
    return TaylorSource(jet.t0, [apply_boundary_matrix(B, pec_face(s)) for s in jet.arrays()])


def _cutoff_poly(smoothness: int = 4) -> np.polynomial.Polynomial:
    """Monotone polynomial step from 0 at 0 to 1 at 1 with ``smoothness`` vanishing derivatives at both ends."""
    P = np.polynomial.Polynomial
    r = smoothness
    base = P([0, 1]) ** r * P([1, -1]) ** r
    step = base.integ()
    return step / step(1.0)


@dataclass
class JetExtension:
    """Taylor polynomial of a jet times a smooth cutoff.

    The cutoff equals 1 on ``[t0, t0 + horizon/2]`` and 0 beyond ``t0 + horizon``,
    so all derivatives at ``t0`` reproduce the jet exactly.
    """

    t0: float
    coeffs: list[np.ndarray]
    horizon: float
    grid: GridSpec
    _step: np.polynomial.Polynomial = field(default_factory=_cutoff_poly, repr=False)

    def _cutoff(self, s: float, j: int) -> float:
        half = self.horizon / 2
        if s <= half:
            return 1.0 if j == 0 else 0.0
        if s >= self.horizon:
            return 0.0
        z = (s - half) / half
        if j == 0:
            return float(1.0 - self._step(z))
        return float(-self._step.deriv(j)(z) / half**j)

    def _taylor(self, s: float, j: int) -> np.ndarray:
        out = np.zeros_like(self.coeffs[0], dtype=float)
        for p in range(j, len(self.coeffs)):
            out = out + self.coeffs[p] * (s ** (p - j) / math.factorial(p - j))
        return out

    def derivative(self, t: float, j: int = 0) -> np.ndarray:
        s = t - self.t0
        out = np.zeros_like(self.coeffs[0], dtype=float)
        for i in range(j + 1):
            c = self._cutoff(s, j - i)
            if c != 0.0:
                out = out + math.comb(j, i) * c * self._taylor(s, i)
        return out

    def value(self, t: float) -> np.ndarray:
        return self.derivative(t, 0)

    def sample(self, times) -> Trajectory:
        times = np.asarray(times, dtype=float)
        vals = np.stack([self.derivative(t, 0) for t in times])
        ders = np.stack([self.derivative(t, 1) for t in times])
        return Trajectory(self.grid, times, vals, ders)

    def jet(self, order: int) -> list[np.ndarray]:
        return [self.derivative(self.t0, j) for j in range(order + 1)]

    def perturbed(self, order: int, w: np.ndarray) -> "JetExtension":
        """Add ``w (t - t0)^order / order!`` to the Taylor part; lower jet entries are unchanged."""
        coeffs = list(self.coeffs) + [np.zeros_like(self.coeffs[0])] * max(0, order + 1 - len(self.coeffs))
        coeffs[order] = coeffs[order] + w
        return JetExtension(self.t0, coeffs, self.horizon, self.grid)


def jet_realizing_extension(jet: InitialJet, horizon: float) -> JetExtension:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return JetExtension(jet.t0, jet.arrays(), float(horizon), jet.grid)
