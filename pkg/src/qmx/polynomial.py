"""Sparse multivariate polynomials with exact differentiation.

Coefficients may be floats, ints or ``fractions.Fraction``; evaluation works on
numpy arrays of any dtype, including object arrays of Fractions.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Polynomial:
    nvars: int
    terms: tuple  # ((exponents, coefficient), ...)

    @classmethod
    def from_dict(cls, nvars: int, terms: dict) -> "Polynomial":
        clean = {tuple(int(e) for e in k): c for k, c in terms.items() if c != 0}
        for k in clean:
            if len(k) != nvars:
                raise ValueError(f"exponent {k} does not have {nvars} entries")
        return cls(nvars, tuple(sorted(clean.items())))

    @classmethod
    def constant(cls, nvars: int, c) -> "Polynomial":
        return cls.from_dict(nvars, {(0,) * nvars: c})

    @classmethod
    def random(cls, nvars: int, degree: int, rng: np.random.Generator, nterms: int = 6, rational=False):
        from fractions import Fraction

        terms = {}
        for _ in range(nterms):
            d = int(rng.integers(0, degree + 1))
            exps = [0] * nvars
            for _ in range(d):
                exps[int(rng.integers(0, nvars))] += 1
            c = int(rng.integers(-4, 5)) or 1
            terms[tuple(exps)] = terms.get(tuple(exps), 0) + (Fraction(c, int(rng.integers(1, 4))) if rational else float(c))
        return cls.from_dict(nvars, terms)

    def as_dict(self) -> dict:
        return dict(self.terms)

    @property
    def degree(self) -> int:
        return max((sum(k) for k, _ in self.terms), default=0)

    def diff(self, var: int, times: int = 1) -> "Polynomial":
        out = {}
        for exps, c in self.terms:
            e = exps[var]
            if e < times:
                continue
            fac = 1
            for i in range(times):
                fac *= e - i
            new = list(exps)
            new[var] -= times
            out[tuple(new)] = out.get(tuple(new), 0) + c * fac
        return Polynomial.from_dict(self.nvars, out)

    def diff_multi(self, orders) -> "Polynomial":
        p = self
        for var, n in enumerate(orders):
            if n:
                p = p.diff(var, n)
        return p

    def __call__(self, *args):
        if len(args) != self.nvars:
            raise ValueError(f"expected {self.nvars} arguments")
        shape = np.broadcast_shapes(*(np.shape(a) for a in args))
        acc = None
        for exps, c in self.terms:
            term = c
            for a, e in zip(args, exps):
                if e:
                    term = term * a**e
            acc = term if acc is None else acc + term
        if acc is None:
            return np.zeros(shape) if shape else 0.0
        return np.broadcast_to(acc, shape) if shape and np.shape(acc) != shape else acc

    def __add__(self, other: "Polynomial") -> "Polynomial":
        d = self.as_dict()
        for k, c in other.terms:
            d[k] = d.get(k, 0) + c
        return Polynomial.from_dict(self.nvars, d)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial.from_dict(self.nvars, {k: c * other for k, c in self.terms})
        d = {}
        for (ka, ca), (kb, cb) in itertools.product(self.terms, other.terms):
            k = tuple(x + y for x, y in zip(ka, kb))
            d[k] = d.get(k, 0) + ca * cb
        return Polynomial.from_dict(self.nvars, d)

    __rmul__ = __mul__
