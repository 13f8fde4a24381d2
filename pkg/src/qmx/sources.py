"""Time-analytic data suppliers: ``source(t, j)`` returns ``d_t^j`` of the data at ``t``."""

from __future__ import annotations

import math
from typing import Callable, Protocol, Sequence

import numpy as np
import sympy as sp

from .grid import GridSpec

T, X1, X2, X3 = sp.symbols("t x1 x2 x3", real=True)


class TimeSource(Protocol):
    def __call__(self, t: float, j: int = 0) -> np.ndarray: ...


class ZeroSource:
    def __init__(self, shape: tuple):
        self.shape = tuple(shape)

    def __call__(self, t: float, j: int = 0) -> np.ndarray:
        return np.zeros(self.shape)


class TaylorSource:
    """``sum_p c_p (t - t0)^p / p!`` with array coefficients."""

    def __init__(self, t0: float, coeffs: Sequence[np.ndarray]):
        self.t0 = float(t0)
        self.coeffs = [np.asarray(c) for c in coeffs]

    def __call__(self, t: float, j: int = 0) -> np.ndarray:
        s = t - self.t0
        out = np.zeros_like(self.coeffs[0], dtype=float)
        for p in range(j, len(self.coeffs)):
            out = out + self.coeffs[p] * (s ** (p - j) / math.factorial(p - j))
        return out


class SumSource:
    def __init__(self, *parts: TimeSource):
        self.parts = parts

    def __call__(self, t: float, j: int = 0) -> np.ndarray:
        return sum(p(t, j) for p in self.parts)


class ScaledSource:
    def __init__(self, scale: float, base: TimeSource):
        self.scale, self.base = float(scale), base

    def __call__(self, t: float, j: int = 0) -> np.ndarray:
        return self.scale * self.base(t, j)


class FunctionSource:
    """Wrap a plain ``fn(t, j)``."""

    def __init__(self, fn: Callable[[float, int], np.ndarray]):
        self.fn = fn

    def __call__(self, t: float, j: int = 0) -> np.ndarray:
        return self.fn(t, j)


_BY_NAME = {s.name: s for s in (T, X1, X2, X3)}


def _canonical(expr: sp.Expr) -> sp.Expr:
    """Replace look-alike symbols (same name, other assumptions) by the module's own."""
    subs = {}
    for s in expr.free_symbols:
        if s.name not in _BY_NAME:
            raise ValueError(f"unknown symbol {s} in data expression; use t, x1, x2, x3")
        if s != _BY_NAME[s.name]:
            subs[s] = _BY_NAME[s.name]
    return expr.xreplace(subs) if subs else expr


class SympySource:
    """Components given as sympy expressions in ``t, x1, x2, x3``.

    On the volume the result has shape ``(n, *grid.shape)``; with ``face=True``
    it is evaluated on the bottom face of axis 3, shape ``(n, n1, n2)``.
    """

    def __init__(self, exprs: Sequence, grid: GridSpec, face: bool = False):
        self.exprs = [_canonical(sp.sympify(e)) for e in exprs]
        self.grid = grid
        self.face = face
        x1, x2, x3 = grid.coords()
        if face:
            x1, x2, x3 = x1[:, :, 0], x2[:, :, 0], np.full((1, 1), grid.origin[2])
        self._x = (x1, x2, x3)
        self._shape = (len(self.exprs),) + (grid.shape[:2] if face else grid.shape)
        self._fns: dict[int, Callable] = {}

    def _fn(self, j: int):
        if j not in self._fns:
            exprs = [sp.diff(e, T, j) for e in self.exprs]
            self._fns[j] = [sp.lambdify((T, X1, X2, X3), e, "numpy") for e in exprs]
        return self._fns[j]

    def __call__(self, t: float, j: int = 0) -> np.ndarray:
        out = np.empty(self._shape)
        for i, fn in enumerate(self._fn(j)):
            out[i] = np.broadcast_to(fn(t, *self._x), self._shape[1:])
        return out
