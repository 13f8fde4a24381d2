"""Structured collocated grids, field containers and discrete differential operators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels

BOUNDARY_MODES = ("periodic", "pec_bottom_open_top", "open")
DEFAULT_CELL_CAP = 2**24

# curl = sum_j J_j d_j
J_MATRICES = np.array(
    [
        [[0, 0, 0], [0, 0, -1], [0, 1, 0]],
        [[0, 0, 1], [0, 0, 0], [-1, 0, 0]],
        [[0, -1, 0], [1, 0, 0], [0, 0, 0]],
    ],
    dtype=float,
)


def maxwell_block(j: int) -> np.ndarray:
    """The constant 6x6 coefficient ``[[0, -J_j], [J_j, 0]]`` for axis ``j`` in 1..3."""
    Jj = J_MATRICES[j - 1]
    A = np.zeros((6, 6))
    A[:3, 3:] = -Jj
    A[3:, :3] = Jj
    return A


A_CO = np.stack([maxwell_block(j) for j in (1, 2, 3)])


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """A box of collocated nodes.

    Periodic axes hold ``n`` nodes for ``n`` cells; other axes hold ``n + 1``
    nodes including both faces. The conducting face, when present, is the
    bottom face of axis 3 with outer normal ``(0, 0, -1)``.
    """

    cells: tuple[int, int, int]
    spacing: tuple[float, float, float]
    origin: tuple[float, float, float] = (0.0, 0.0, 0.0)
    boundary: tuple[str, str, str] = ("periodic", "periodic", "pec_bottom_open_top")
    cell_cap: int = DEFAULT_CELL_CAP

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(int(c) for c in self.cells))
        object.__setattr__(self, "spacing", tuple(float(h) for h in self.spacing))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "boundary", tuple(self.boundary))
        if len(self.cells) != 3 or len(self.spacing) != 3 or len(self.boundary) != 3:
            raise GridError("grid needs exactly three axes")
        if any(c < 1 for c in self.cells):
            raise GridError(f"cells must be positive, got {self.cells}")
        if any(not (h > 0) or not math.isfinite(h) for h in self.spacing):
            raise GridError(f"spacing must be strictly positive, got {self.spacing}")
        for ax, mode in enumerate(self.boundary):
            if mode not in BOUNDARY_MODES:
                raise GridError(f"unknown boundary mode {mode!r}")
            if mode == "pec_bottom_open_top" and ax != 2:
                raise GridError("pec_bottom_open_top is only legal on axis 3")
        if math.prod(self.cells) > self.cell_cap:
            raise GridError(f"{math.prod(self.cells)} cells exceed the cap {self.cell_cap}")

    @classmethod
    def box(cls, cells: int | Sequence[int], extent: float | Sequence[float] = 1.0, **kw) -> "GridSpec":
        cells = (cells,) * 3 if np.isscalar(cells) else tuple(cells)
        extent = (extent,) * 3 if np.isscalar(extent) else tuple(extent)
        return cls(cells, tuple(L / n for L, n in zip(extent, cells)), **kw)

    @property
    def periodic(self) -> tuple[bool, bool, bool]:
        return tuple(m == "periodic" for m in self.boundary)

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(n if p else n + 1 for n, p in zip(self.cells, self.periodic))

    @property
    def extent(self) -> tuple[float, float, float]:
        return tuple(n * h for n, h in zip(self.cells, self.spacing))

    @property
    def has_pec(self) -> bool:
        return self.boundary[2] == "pec_bottom_open_top"

    @property
    def pec_normal(self) -> np.ndarray:
        return np.array([0.0, 0.0, -1.0])

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    def axis_coords(self, axis: int) -> np.ndarray:
        """Node coordinates along ``axis`` (1-based)."""
        a = axis - 1
        return self.origin[a] + self.spacing[a] * np.arange(self.shape[a])

    def coords(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Broadcastable coordinate arrays, shapes (n1,1,1), (1,n2,1), (1,1,n3)."""
        x1, x2, x3 = (self.axis_coords(a) for a in (1, 2, 3))
        return x1[:, None, None], x2[None, :, None], x3[None, None, :]

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(np.broadcast_to(c, self.shape) for c in self.coords())

    def quadrature_weights(self) -> np.ndarray:
        """Nodal weights: cell volume, halved at each non-periodic face node (trapezoid)."""
        ws = []
        for a in range(3):
            w = np.full(self.shape[a], self.spacing[a])
            if not self.periodic[a]:
                w[0] *= 0.5
                w[-1] *= 0.5
            ws.append(w)
        return ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]

    def face_weights(self) -> np.ndarray:
        """Trapezoid weights on the bottom face of axis 3, shape (n1, n2)."""
        ws = []
        for a in range(2):
            w = np.full(self.shape[a], self.spacing[a])
            if not self.periodic[a]:
                w[0] *= 0.5
                w[-1] *= 0.5
            ws.append(w)
        return ws[0][:, None] * ws[1][None, :]

    def zeros(self, ncomp: int = 6) -> np.ndarray:
        return np.zeros((ncomp,) + self.shape)

    def refined(self, factor: int = 2) -> "GridSpec":
        return GridSpec(
            tuple(c * factor for c in self.cells),
            tuple(h / factor for h in self.spacing),
            self.origin,
            self.boundary,
            self.cell_cap,
        )


@dataclass(frozen=True)
class FieldState:
    """The state ``u = (E, H)`` at one time, values of shape ``(6, *grid.shape)``."""

    grid: GridSpec
    time: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.shape != (6,) + self.grid.shape:
            raise GridError(f"values shape {v.shape} does not match grid {(6,) + self.grid.shape}")
        object.__setattr__(self, "values", v)

    @property
    def E(self) -> np.ndarray:
        return self.values[:3]

    @property
    def H(self) -> np.ndarray:
        return self.values[3:]

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    def with_values(self, values: np.ndarray, time: float | None = None) -> "FieldState":
        return FieldState(self.grid, self.time if time is None else time, values)

    @classmethod
    def zeros(cls, grid: GridSpec, time: float = 0.0) -> "FieldState":
        return cls(grid, time, grid.zeros())


@dataclass(frozen=True)
class BoundaryTrace:
    """Boundary data on the conducting face, values of shape ``(3, n1, n2)``."""

    grid: GridSpec
    time: float
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values)
        expected = (3,) + self.grid.shape[:2]
        if v.shape != expected:
            raise GridError(f"trace shape {v.shape} does not match face {expected}")
        object.__setattr__(self, "values", v)


def _check_axis(grid: GridSpec, axis: int) -> int:
    if axis not in (1, 2, 3):
        raise GridError(f"axis must be 1, 2 or 3, got {axis}")
    if grid.cells[axis - 1] < 3:
        raise GridError(f"axis {axis} needs at least 3 cells, has {grid.cells[axis - 1]}")
    return axis - 1


def discrete_partial(f: np.ndarray, axis: int, grid: GridSpec) -> np.ndarray:
    """Second-order central difference along ``axis`` (1-based).

    ``f`` has the grid as its trailing three axes. Non-periodic faces use the
    second-order one-sided closure, so the operator is exact on per-axis
    quadratics at every node.
    """
    a = _check_axis(grid, axis)
    f = np.asarray(f)
    if f.shape[-3:] != grid.shape:
        raise GridError(f"field shape {f.shape} does not end with grid shape {grid.shape}")
    return _kernels.diff_axis(f, f.ndim - 3 + a, grid.spacing[a], grid.periodic[a])


def gradient(f: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Stack of the three discrete partials, new leading axis."""
    return np.stack([discrete_partial(f, j, grid) for j in (1, 2, 3)])


def discrete_curl(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``sum_j J_j d_j v`` for a 3-vector grid function."""
    d = [discrete_partial(v, j, grid) for j in (1, 2, 3)]
    return np.stack(
        [
            d[1][2] - d[2][1],
            d[2][0] - d[0][2],
            d[0][1] - d[1][0],
        ]
    )


def discrete_div(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    return sum(discrete_partial(v[j], j + 1, grid) for j in range(3))


def maxwell_operator(u: np.ndarray, grid: GridSpec) -> np.ndarray:
    """``sum_j A_j^co d_j u = (-curl H, curl E)``."""
    return np.concatenate([-discrete_curl(u[3:], grid), discrete_curl(u[:3], grid)])


def pec_face(values: np.ndarray) -> np.ndarray:
    """Restriction of a grid function to the bottom face of axis 3."""
    return values[..., 0]


def boundary_matrix(nu=(0.0, 0.0, -1.0)) -> np.ndarray:
    """The 3x6 matrix with ``B u = E x nu`` (tangential electric field)."""
    n1, n2, n3 = nu
    return np.array(
        [
            [0, n3, -n2, 0, 0, 0],
            [-n3, 0, n1, 0, 0, 0],
            [n2, -n1, 0, 0, 0, 0],
        ],
        dtype=float,
    )


def apply_boundary_matrix(B: np.ndarray, u_face: np.ndarray) -> np.ndarray:
    """``B u`` on face values ``u_face`` of shape (6, n1, n2)."""
    return np.tensordot(B, u_face, axes=(1, 0))
