"""Higher-order chain rule for compositions theta(x, v(t, x)).

Terms are generated by differentiating one direction at a time and merging
like terms, so the coefficients are exactly those of iterated product and
chain rules. A term is the product

    coefficient * (d_y^j d_x^beta theta)(v) [d^gamma_1 v, ..., d^gamma_j v]

where the y-derivative tensor is contracted with the listed jet factors.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Mapping, NamedTuple

import numpy as np

from .grid import GridSpec
from .norms import l2_norm


class MultiIndex(NamedTuple):
    """Derivative orders ``(time, x1, x2, x3)``."""

    t: int = 0
    x1: int = 0
    x2: int = 0
    x3: int = 0

    @property
    def order(self) -> int:
        return self.t + self.x1 + self.x2 + self.x3

    @property
    def spatial(self) -> tuple[int, int, int]:
        return (self.x1, self.x2, self.x3)

    def __add__(self, other) -> "MultiIndex":  # type: ignore[override]
        return MultiIndex(*(a + b for a, b in zip(self, other)))

    def __sub__(self, other) -> "MultiIndex":
        return MultiIndex(*(a - b for a, b in zip(self, other)))

    def directions(self) -> list[int]:
        """Unit directions (0 = time, 1..3 = space) whose sum is this index, time first."""
        return [d for d in range(4) for _ in range(self[d])]

    @classmethod
    def unit(cls, d: int) -> "MultiIndex":
        e = [0, 0, 0, 0]
        e[d] = 1
        return cls(*e)


ZERO = MultiIndex()


@dataclass(frozen=True)
class PartitionTerm:
    """One summand of the chain rule.

    ``gammas`` is sorted; ``component_indices`` is ``None`` when the sum over
    state components is left to tensor contraction.
    """

    beta: MultiIndex
    gammas: tuple[MultiIndex, ...]
    coefficient: int
    component_indices: tuple[int, ...] | None = None

    @property
    def j(self) -> int:
        return len(self.gammas)


def _differentiate(terms: dict, d: int) -> dict:
    e = MultiIndex.unit(d)
    out: dict = {}

    def add(key, c):
        out[key] = out.get(key, 0) + c

    for (beta, gammas), c in terms.items():
        if d > 0:
            add((beta + e, gammas), c)
        add((beta, tuple(sorted(gammas + (e,)))), c)
        for i, g in enumerate(gammas):
            new = gammas[:i] + (g + e,) + gammas[i + 1 :]
            add((beta, tuple(sorted(new))), c)
    return out


@functools.lru_cache(maxsize=None)
def _terms(alpha: MultiIndex) -> tuple[PartitionTerm, ...]:
    terms: dict = {(ZERO, ()): 1}
    for d in alpha.directions():
        terms = _differentiate(terms, d)
    ordered = sorted(terms.items(), key=lambda kv: (len(kv[0][1]), kv[0][0], kv[0][1]))
    return tuple(PartitionTerm(b, g, c) for (b, g), c in ordered)


def enumerate_terms(alpha, n_components: int | None = None) -> list[PartitionTerm]:
    """All terms of ``d^alpha theta(v)`` in a canonical order.

    With ``n_components`` the component sums are expanded explicitly, one term
    per tuple ``(l_1, ..., l_j)``. The pure x-derivative term ``(d_x^alpha theta)(v)``
    has ``j = 0`` and appears only for purely spatial ``alpha``.
    """
    alpha = MultiIndex(*alpha)
    if alpha.order == 0:
        raise ValueError("alpha must have order >= 1; use theta(v) directly")
    if any(a < 0 for a in alpha):
        raise ValueError("negative multi-index")
    base = list(_terms(alpha))
    if n_components is None:
        return base
    out = []
    for term in base:
        for ls in itertools.product(range(n_components), repeat=term.j):
            out.append(PartitionTerm(term.beta, term.gammas, term.coefficient, ls))
    return out


def contract(T: np.ndarray, vectors, n_lead: int = 0) -> np.ndarray:
    """Contract the state axes of ``T`` (after ``n_lead`` output axes) with the vectors.

    ``T`` has shape ``(*lead, 6, ..., 6, *g)`` with ``len(vectors)`` state axes; each
    vector has shape ``(6, *g)``.
    """
    out = T
    for i in range(len(vectors) - 1, -1, -1):
        moved = np.moveaxis(out, n_lead + i, 0)
        w = vectors[i]
        out = sum(moved[l] * w[l] for l in range(w.shape[0]))
    return out


class MissingJetComponent(KeyError):
    pass


def compose_derivative(component, v_jet: Mapping, alpha, x=None) -> np.ndarray:
    """``d^alpha [theta(x, v)]`` from the jet of ``v``.

    ``component`` provides ``derivative(y, k, beta, x)`` returning the k-th
    state derivative tensor of ``d_x^beta theta`` at ``y``; ``v_jet`` maps
    ``MultiIndex`` to arrays of shape ``(6, *g)`` and must contain the zero index.
    """
    alpha = MultiIndex(*alpha)
    v = v_jet[ZERO] if ZERO in v_jet else v_jet[tuple(ZERO)]
    if alpha.order == 0:
        return component.derivative(v, 0, (0, 0, 0), x)
    acc = None
    for term in enumerate_terms(alpha):
        factors = []
        for g in term.gammas:
            if g not in v_jet:
                raise MissingJetComponent(f"jet lacks d^{tuple(g)} v")
            factors.append(v_jet[g])
        T = component.derivative(v, term.j, term.beta.spatial, x)
        val = term.coefficient * contract(T, factors)
        acc = val if acc is None else acc + val
    return acc


def difference_norm_oracle(component, jet1: Mapping, jet2: Mapping, alpha, grid: GridSpec, m: int, x=None):
    """Both sides of the difference estimate for ``d^alpha theta(v1) - d^alpha theta(v2)``.

    Returns ``(lhs, rhs)`` where ``lhs`` is the L2 norm of the difference and
    ``rhs`` maps each multi-index ``beta`` with ``|beta| <= max(m, 3) - 1`` to
    ``||d^beta v1 - d^beta v2||_{L2}``; callers compare ``lhs`` with ``sum(rhs)``.
    """
    alpha = MultiIndex(*alpha)
    if alpha.order > m - 1:
        raise ValueError("|alpha| must not exceed m - 1")
    ref = jet1[ZERO]
    if np.shape(ref) != np.shape(jet2[ZERO]) or np.shape(ref)[-3:] != grid.shape:
        raise ValueError("jets do not share the grid")
    lhs = l2_norm(
        np.asarray(compose_derivative(component, jet1, alpha, x) - compose_derivative(component, jet2, alpha, x))[None],
        grid,
    )
    top = max(m, 3) - 1
    rhs = {}
    for beta in set(jet1) & set(jet2):
        beta = MultiIndex(*beta)
        if beta.order <= top:
            rhs[beta] = l2_norm(jet1[beta] - jet2[beta], grid)
    return lhs, rhs


def term_table(alpha) -> str:
    """Human-readable listing of ``enumerate_terms(alpha)``."""
    alpha = MultiIndex(*alpha)
    lines = [f"d^{tuple(alpha)} theta(v) =", f"{'coef':>6}  {'j':>2}  {'beta (x)':<10}  gammas"]
    for t in enumerate_terms(alpha):
        gs = " ".join(str(tuple(g)) for g in t.gammas) or "-"
        lines.append(f"{t.coefficient:>6}  {t.j:>2}  {str(t.beta.spatial):<10}  {gs}")
    lines.append(f"{len(enumerate_terms(alpha))} terms")
    return "\n".join(lines)
