"""Instantaneous material laws: theta, its state Jacobian chi, conductivity sigma, state domain.

Derivative tensors are laid out output-indices first, then one axis of length
6 per state derivative, then the grid axes (possibly none for a single point)::

    theta_tensor(y, k)[i, l1, ..., lk, ...] = d_{y_lk} ... d_{y_l1} theta_i(y)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .polynomial import Polynomial

ZERO_BETA = (0, 0, 0)


class MaterialLawError(ValueError):
    pass


class StateDomainError(MaterialLawError):
    """A state left the admissible domain."""


@dataclass(frozen=True)
class StateDomain:
    """Admissible state set: all of R^6, a centred ball, or an axis-aligned box."""

    kind: str = "all"
    radius: float = math.inf
    lower: tuple = (-math.inf,) * 6
    upper: tuple = (math.inf,) * 6

    def __post_init__(self):
        if self.kind not in ("all", "ball", "box"):
            raise MaterialLawError(f"unknown state domain kind {self.kind!r}")
        if self.kind == "ball" and not self.radius > 0:
            raise MaterialLawError("ball radius must be positive")
        if self.kind == "box":
            lo, hi = np.asarray(self.lower, float), np.asarray(self.upper, float)
            if lo.shape != (6,) or hi.shape != (6,) or np.any(lo >= hi):
                raise MaterialLawError("box needs six lower < upper pairs")

    @classmethod
    def ball(cls, radius: float) -> "StateDomain":
        return cls("ball", radius=float(radius))

    @classmethod
    def box(cls, lower: Sequence[float], upper: Sequence[float]) -> "StateDomain":
        return cls("box", lower=tuple(map(float, lower)), upper=tuple(map(float, upper)))

    def signed_distance(self, y: np.ndarray) -> np.ndarray:
        """Nodewise distance to the boundary; negative outside the domain."""
        y = np.asarray(y, dtype=float)
        g = y.shape[1:]
        if self.kind == "all":
            return np.full(g, math.inf)
        if self.kind == "ball":
            return self.radius - np.sqrt(np.sum(y**2, axis=0))
        lo = np.asarray(self.lower).reshape((6,) + (1,) * len(g))
        hi = np.asarray(self.upper).reshape((6,) + (1,) * len(g))
        return np.min(np.minimum(y - lo, hi - y), axis=0)

    def distance(self, y: np.ndarray) -> float:
        """Minimum over nodes of the signed distance of ``y`` to the boundary."""
        return float(np.min(self.signed_distance(y)))

    def contains(self, y: np.ndarray) -> bool:
        return bool(np.all(self.signed_distance(y) > 0))


class MaterialLaw:
    """Base class: subclasses provide ``theta_tensor`` and ``sigma_tensor``."""

    name = "abstract"
    eta: float = 1.0
    m_max: int = 0
    state_domain: StateDomain = StateDomain()
    state_independent = False

    # -- to be provided -------------------------------------------------
    def theta_tensor(self, y, k: int, x=None, beta=ZERO_BETA) -> np.ndarray:
        raise NotImplementedError

    def sigma_tensor(self, y, k: int, x=None) -> np.ndarray:
        raise NotImplementedError

    # -- derived evaluators ----------------------------------------------
    def _check_order(self, k: int):
        if k > self.m_max:
            raise MaterialLawError(f"derivative order {k} exceeds m_max={self.m_max}")

    def check_domain(self, y):
        if self.state_domain.kind != "all" and not self.state_domain.contains(y):
            raise StateDomainError("state outside the admissible domain")

    def theta(self, y, x=None) -> np.ndarray:
        self.check_domain(y)
        return self.theta_tensor(y, 0, x)

    def chi(self, y, x=None) -> np.ndarray:
        self.check_domain(y)
        return self.theta_tensor(y, 1, x)

    def chi_tensor(self, y, k: int, x=None) -> np.ndarray:
        """k-th state derivative of chi, shape (6, 6, 6^k, *g)."""
        return self.theta_tensor(y, k + 1, x)

    def sigma(self, y, x=None) -> np.ndarray:
        self.check_domain(y)
        return self.sigma_tensor(y, 0, x)

    def chi_inverse(self, y, x=None) -> np.ndarray:
        c = self.chi(y, x)
        g = c.shape[2:]
        cm = np.moveaxis(c.reshape(6, 6, -1), -1, 0)
        try:
            inv = np.linalg.inv(cm)
        except np.linalg.LinAlgError as exc:
            raise MaterialLawError("chi is numerically singular") from exc
        resid = np.max(np.abs(cm @ inv - np.eye(6)), initial=0.0)
        if not np.isfinite(resid) or resid > 1e-8:
            raise MaterialLawError(f"chi inverse residual {resid:.3e}: eta floor violated")
        return np.moveaxis(inv, 0, -1).reshape((6, 6) + g)

    def y_derivative(self, y, orders: Sequence[int], x=None, which: str = "theta") -> np.ndarray:
        """``d_y^orders`` of theta (or chi, sigma) for a 6-entry multi-index ``orders``."""
        orders = tuple(int(o) for o in orders)
        if len(orders) != 6 or min(orders) < 0:
            raise MaterialLawError("orders must be a 6-entry multi-index")
        k = sum(orders)
        idx = tuple(i for i, o in enumerate(orders) for _ in range(o))
        if which == "theta":
            self._check_order(k)
            T = self.theta_tensor(y, k, x)
            return T[(slice(None),) + idx]
        if which == "chi":
            self._check_order(k + 1)
            T = self.chi_tensor(y, k, x)
        elif which == "sigma":
            self._check_order(k)
            T = self.sigma_tensor(y, k, x)
        else:
            raise ValueError(which)
        return T[(slice(None), slice(None)) + idx]

    def distance_to_state_boundary(self, values) -> float:
        return self.state_domain.distance(values)


def _grid_shape(y) -> tuple:
    return np.shape(y)[1:]


@dataclass(frozen=True, eq=False)
class KerrLaw(MaterialLaw):
    """``D = E + vartheta |E|^2 E``, ``B = H``, conductivity ``(c0 + c2 |E|^2) I`` on E.

    ``vartheta`` is a nonnegative scalar or a polynomial field in x (a
    ``Polynomial`` in three variables); a 3x3 coefficient is accepted only
    when isotropic, because any other choice makes chi non-symmetric.
    """

    vartheta: float | Polynomial = 0.0
    conductivity_scale: float = 0.0
    conductivity_quadratic: float = 0.0
    eta: float = 1.0
    state_domain: StateDomain = field(default_factory=StateDomain)
    m_max: int = 16
    name = "kerr"

    def __post_init__(self):
        v = self.vartheta
        if isinstance(v, Polynomial):
            if v.nvars != 3:
                raise MaterialLawError("vartheta field must be a polynomial in (x1, x2, x3)")
        else:
            a = np.asarray(v, dtype=float)
            if a.size == 9:
                a = a.reshape(3, 3)
                if not np.allclose(a, a[0, 0] * np.eye(3), atol=1e-14):
                    raise MaterialLawError("anisotropic vartheta makes chi non-symmetric; only c*I is supported")
                a = a[0, 0]
            elif a.size != 1:
                raise MaterialLawError("vartheta must be a scalar or 9 numbers")
            if float(a) < 0:
                raise MaterialLawError("vartheta must be nonnegative")
            object.__setattr__(self, "vartheta", float(a))
        if not self.eta > 0:
            raise MaterialLawError("eta must be positive")

    @property
    def state_independent(self) -> bool:
        return (not isinstance(self.vartheta, Polynomial) and self.vartheta == 0.0
                and self.conductivity_quadratic == 0.0)

    def _vt(self, x, beta, g):
        v = self.vartheta
        if isinstance(v, Polynomial):
            if x is None:
                raise MaterialLawError("x-dependent vartheta needs coordinates")
            return np.broadcast_to(v.diff_multi(beta)(*x), g) if g else v.diff_multi(beta)(*x)
        return v if beta == ZERO_BETA else 0.0

    def theta_tensor(self, y, k: int, x=None, beta=ZERO_BETA) -> np.ndarray:
        y = np.asarray(y)
        g = _grid_shape(y)
        beta = tuple(beta)
        plain = beta == ZERO_BETA
        vt = self._vt(x, beta, g)
        E = y[:3]
        dtype = np.result_type(y, float) if y.dtype != object else object
        out = np.zeros((6,) + (6,) * k + g, dtype=dtype)
        if k == 0:
            s = np.sum(E * E, axis=0)
            out[:3] = vt * s * E + (E if plain else 0)
            if plain:
                out[3:] = y[3:]
            return out
        if k == 1:
            s = np.sum(E * E, axis=0)
            for i in range(3):
                for j in range(3):
                    out[i, j] = 2 * vt * E[i] * E[j] + (vt * s + (1 if plain else 0) if i == j else 0)
            if plain:
                for i in range(3, 6):
                    out[i, i] = 1
            return out
        if k == 2:
            for i in range(3):
                for j in range(3):
                    for l in range(3):
                        out[i, j, l] = 2 * vt * (
                            (E[l] if i == j else 0) + (E[j] if i == l else 0) + (E[i] if j == l else 0)
                        )
            return out
        if k == 3:
            for i in range(3):
                for j in range(3):
                    for l in range(3):
                        for n in range(3):
                            c = (i == j) * (l == n) + (i == l) * (j == n) + (i == n) * (j == l)
                            if c:
                                out[i, j, l, n] = 2 * vt * c
            return out
        return out

    def sigma_tensor(self, y, k: int, x=None) -> np.ndarray:
        y = np.asarray(y)
        g = _grid_shape(y)
        E = y[:3]
        c0, c2 = self.conductivity_scale, self.conductivity_quadratic
        out = np.zeros((6, 6) + (6,) * k + g, dtype=np.result_type(y, float) if y.dtype != object else object)
        if k == 0:
            s = np.sum(E * E, axis=0)
            for a in range(3):
                out[a, a] = c0 + c2 * s
        elif k == 1:
            for a in range(3):
                for l in range(3):
                    out[a, a, l] = 2 * c2 * E[l]
        elif k == 2:
            for a in range(3):
                for l in range(3):
                    out[a, a, l, l] = 2 * c2
        return out


@dataclass(frozen=True, eq=False)
class ConstantLaw(MaterialLaw):
    """Linear law ``theta(y) = chi y`` with a constant SPD ``chi`` and constant ``sigma``."""

    chi_matrix: np.ndarray = field(default_factory=lambda: np.eye(6))
    sigma_matrix: np.ndarray = field(default_factory=lambda: np.zeros((6, 6)))
    eta: float | None = None
    state_domain: StateDomain = field(default_factory=StateDomain)
    m_max: int = 16
    name = "constant"
    state_independent = True

    def __post_init__(self):
        c = np.asarray(self.chi_matrix, dtype=float)
        s = np.asarray(self.sigma_matrix, dtype=float)
        if c.shape != (6, 6) or s.shape != (6, 6):
            raise MaterialLawError("chi and sigma must be 6x6")
        if np.max(np.abs(c - c.T)) > 1e-12 * max(1.0, np.max(np.abs(c))):
            raise MaterialLawError("chi must be symmetric")
        if np.any(s[3:]) or np.any(s[:, 3:]):
            raise MaterialLawError("sigma acts on E only: rows/columns 4-6 must vanish")
        lam = float(np.linalg.eigvalsh(c).min())
        eta = lam if self.eta is None else float(self.eta)
        if lam < eta - 1e-10 or eta <= 0:
            raise MaterialLawError(f"chi has eigenvalue {lam} below eta={eta}")
        object.__setattr__(self, "chi_matrix", c)
        object.__setattr__(self, "sigma_matrix", s)
        object.__setattr__(self, "eta", eta)

    def theta_tensor(self, y, k: int, x=None, beta=ZERO_BETA) -> np.ndarray:
        y = np.asarray(y)
        g = _grid_shape(y)
        out = np.zeros((6,) + (6,) * k + g, dtype=np.result_type(y, float) if y.dtype != object else object)
        if tuple(beta) != ZERO_BETA:
            return out
        if k == 0:
            return np.tensordot(self.chi_matrix, y, axes=(1, 0))
        if k == 1:
            return np.broadcast_to(self.chi_matrix.reshape((6, 6) + (1,) * len(g)), (6, 6) + g).copy()
        return out

    def sigma_tensor(self, y, k: int, x=None) -> np.ndarray:
        g = _grid_shape(y)
        if k == 0:
            return np.broadcast_to(self.sigma_matrix.reshape((6, 6) + (1,) * len(g)), (6, 6) + g).copy()
        return np.zeros((6, 6) + (6,) * k + g)


def vacuum() -> KerrLaw:
    return KerrLaw(vartheta=0.0)


@dataclass(frozen=True)
class LawComponent:
    """One scalar entry of theta, chi or sigma, usable as a composition target."""

    law: MaterialLaw
    which: str = "theta"
    index: tuple = (0,)

    def derivative(self, y, k: int, beta=ZERO_BETA, x=None) -> np.ndarray:
        """``d_y^k d_x^beta`` of the component at ``y``, shape (6^k, *g)."""
        if self.which == "theta":
            T = self.law.theta_tensor(y, k, x, beta)
        elif self.which == "chi":
            T = self.law.theta_tensor(y, k + 1, x, beta)
        elif tuple(beta) != ZERO_BETA:
            return np.zeros((6,) * k + np.shape(y)[1:])
        else:
            T = self.law.sigma_tensor(y, k, x)
        return T[tuple(self.index)]
