"""Smooth scalar densities with analytic derivatives up to third order.

Every density evaluates batched: ``x`` has shape (..., dim) and the results
carry the same leading shape. Polynomials cover all the energy densities,
contact Hamiltonians and test charts used in the package.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from math import prod

import numpy as np

__all__ = [
    "PolynomialDensity",
    "polynomial",
    "quadratic_density",
    "separable_polynomial",
]


def _falling(e: int, o: int) -> int:
    return prod(range(e - o + 1, e + 1)) if o <= e else 0


@dataclass(frozen=True)
class PolynomialDensity:
    """Sum of monomials ``coef * prod_i x_i**exps[i]``."""

    dim: int
    terms: tuple[tuple[float, tuple[int, ...]], ...]

    def __post_init__(self):
        clean = []
        for coef, exps in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.dim or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps} for dimension {self.dim}")
            clean.append((float(coef), exps))
        object.__setattr__(self, "terms", tuple(clean))

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValueError(f"expected trailing dimension {self.dim}, got shape {x.shape}")
        return x

    def _derivative(self, x: np.ndarray, orders: tuple[int, ...]) -> np.ndarray:
        out = np.zeros(x.shape[:-1])
        for coef, exps in self.terms:
            factor = coef
            for e, o in zip(exps, orders):
                factor *= _falling(e, o)
            if factor == 0.0:
                continue
            term = np.full(x.shape[:-1], factor)
            for i, (e, o) in enumerate(zip(exps, orders)):
                if e - o > 0:
                    term = term * x[..., i] ** (e - o)
            out = out + term
        return out

    def _orders(self, *axes: int) -> tuple[int, ...]:
        orders = [0] * self.dim
        for a in axes:
            orders[a] += 1
        return tuple(orders)

    def value(self, x) -> np.ndarray:
        x = self._check(x)
        return self._derivative(x, (0,) * self.dim)

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        return np.stack([self._derivative(x, self._orders(i)) for i in range(self.dim)], axis=-1)

    def hessian(self, x) -> np.ndarray:
        x = self._check(x)
        d = self.dim
        out = np.empty(x.shape[:-1] + (d, d))
        for i in range(d):
            for j in range(i, d):
                out[..., i, j] = out[..., j, i] = self._derivative(x, self._orders(i, j))
        return out

    def third(self, x) -> np.ndarray:
        x = self._check(x)
        d = self.dim
        out = np.empty(x.shape[:-1] + (d, d, d))
        for i, j, k in product(range(d), repeat=3):
            if i <= j <= k:
                val = self._derivative(x, self._orders(i, j, k))
                for perm in {(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)}:
                    out[(...,) + perm] = val
        return out

    def __add__(self, other: "PolynomialDensity") -> "PolynomialDensity":
        if other.dim != self.dim:
            raise ValueError("cannot add densities of different dimension")
        return PolynomialDensity(self.dim, self.terms + other.terms)

    def scaled(self, factor: float) -> "PolynomialDensity":
        return PolynomialDensity(self.dim, tuple((c * factor, e) for c, e in self.terms))

    @property
    def max_degree(self) -> int:
        return max((sum(e) for _, e in self.terms), default=0)


def polynomial(dim: int, terms) -> PolynomialDensity:
    return PolynomialDensity(dim, tuple((c, tuple(e)) for c, e in terms))


def quadratic_density(dim: int, coefficient=0.5) -> PolynomialDensity:
    """``sum_i c_i x_i**2``; a scalar coefficient applies to every variable."""
    coefs = np.broadcast_to(np.asarray(coefficient, dtype=float), (dim,))
    terms = []
    for i, c in enumerate(coefs):
        exps = [0] * dim
        exps[i] = 2
        terms.append((float(c), tuple(exps)))
    return PolynomialDensity(dim, tuple(terms))


def separable_polynomial(coefficients) -> PolynomialDensity:
    """``sum_i sum_k coefficients[i][k] * x_i**k``."""
    dim = len(coefficients)
    terms = []
    for i, row in enumerate(coefficients):
        for k, c in enumerate(row):
            if c == 0:
                continue
            exps = [0] * dim
            exps[i] = k
            terms.append((float(c), tuple(exps)))
    return PolynomialDensity(dim, tuple(terms))
