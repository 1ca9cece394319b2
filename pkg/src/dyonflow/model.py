"""Physics model containers: holomorphic polynomials, gauge couplings, charges."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .kahler import KahlerModel


@dataclass(frozen=True)
class Polynomial:
    """Holomorphic polynomial in ``n`` complex variables.

    ``terms`` is a tuple of ``(coefficient, exponents)`` pairs, e.g.
    ``((0.1, (0,)), (1j, (2,)))`` for ``0.1 + i z^2``. Only the holomorphic
    variables enter, so conj(P(z)) = P*(conj z) with conjugated coefficients.
    """

    n: int
    terms: tuple = ()

    def __post_init__(self):
        norm = []
        for coef, exps in self.terms:
            exps = tuple(int(e) for e in exps)
            if len(exps) != self.n:
                raise ValueError(f"monomial {exps} has {len(exps)} exponents, expected {self.n}")
            if any(e < 0 for e in exps):
                raise ValueError("negative exponent in polynomial term")
            norm.append((complex(coef), exps))
        object.__setattr__(self, "terms", tuple(norm))

    @classmethod
    def constant(cls, n, value):
        return cls(n, ((complex(value), (0,) * n),))

    @cached_property
    def _arrays(self):
        if not self.terms:
            return np.zeros(0, complex), np.zeros((0, self.n), int)
        c = np.array([t[0] for t in self.terms], dtype=complex)
        e = np.array([t[1] for t in self.terms], dtype=int).reshape(-1, self.n)
        return c, e

    @staticmethod
    def _monomials(phi, exps):
        return np.prod(np.power(phi[None, :], exps), axis=1) if exps.size else np.ones(len(exps), complex)

    def __call__(self, phi):
        c, e = self._arrays
        if not len(c):
            return 0j
        return complex(np.sum(c * self._monomials(np.asarray(phi, complex), e)))

    def grad(self, phi):
        """Holomorphic gradient, shape (n,)."""
        phi = np.asarray(phi, complex)
        c, e = self._arrays
        out = np.zeros(self.n, complex)
        for i in range(self.n):
            ei = e[:, i]
            mask = ei > 0
            if not mask.any():
                continue
            de = e[mask].copy()
            de[:, i] -= 1
            out[i] = np.sum(c[mask] * ei[mask] * self._monomials(phi, de))
        return out

    def hessian(self, phi):
        """Holomorphic second derivatives, shape (n, n)."""
        phi = np.asarray(phi, complex)
        c, e = self._arrays
        out = np.zeros((self.n, self.n), complex)
        for i in range(self.n):
            for j in range(i, self.n):
                de = e.copy()
                fac = de[:, i].astype(float)
                de[:, i] -= 1
                fac = fac * de[:, j]
                de[:, j] -= 1
                mask = fac != 0
                if mask.any():
                    val = np.sum(c[mask] * fac[mask] * self._monomials(phi, de[mask]))
                    out[i, j] = out[j, i] = val
        return out

    @property
    def is_zero(self):
        return all(c == 0 for c, _ in self.terms)

    @property
    def is_constant(self):
        return all(c == 0 or not any(e) for c, e in self.terms)


@dataclass(frozen=True)
class GaugeCouplings:
    """Symmetric matrix ``f_ab(phi)`` of holomorphic polynomials.

    ``entries`` maps ``(a, b)`` with ``a <= b`` (zero based) to a Polynomial;
    missing entries are zero.
    """

    n_v: int
    n_c: int
    entries: tuple = ()

    def __post_init__(self):
        norm = {}
        for (a, b), poly in self.entries:
            a, b = sorted((int(a), int(b)))
            if not (0 <= a < self.n_v and 0 <= b < self.n_v):
                raise ValueError(f"gauge coupling index ({a}, {b}) outside n_v={self.n_v}")
            if poly.n != self.n_c:
                raise ValueError("gauge coupling polynomial has wrong number of variables")
            norm[(a, b)] = poly
        object.__setattr__(self, "entries", tuple(sorted(norm.items())))

    @classmethod
    def constant(cls, matrix, n_c):
        matrix = np.atleast_2d(np.asarray(matrix, complex))
        n_v = matrix.shape[0]
        entries = tuple(
            ((a, b), Polynomial.constant(n_c, matrix[a, b]))
            for a in range(n_v) for b in range(a, n_v) if matrix[a, b] != 0
        )
        return cls(n_v, n_c, entries)

    def f(self, phi):
        out = np.zeros((self.n_v, self.n_v), complex)
        for (a, b), poly in self.entries:
            out[a, b] = out[b, a] = poly(phi)
        return out

    def df(self, phi):
        """Holomorphic derivatives, shape (n_c, n_v, n_v)."""
        out = np.zeros((self.n_c, self.n_v, self.n_v), complex)
        for (a, b), poly in self.entries:
            g = poly.grad(phi)
            out[:, a, b] = g
            out[:, b, a] = g
        return out

    @property
    def is_constant(self):
        return all(p.is_constant for _, p in self.entries)


@dataclass(frozen=True)
class Charges:
    """Magnetic charges ``g`` and electric charges ``q`` (one per vector)."""

    g: tuple
    q: tuple

    def __post_init__(self):
        g = tuple(float(x) for x in np.atleast_1d(self.g))
        q = tuple(float(x) for x in np.atleast_1d(self.q))
        if len(g) != len(q):
            raise ValueError("charges g and q must have the same length")
        if not all(np.isfinite(g + q)):
            raise ValueError("charges must be finite")
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "q", q)

    @property
    def vector(self):
        """Stacked ``(g, q)`` used in the black-hole quadratic form."""
        return np.array(self.g + self.q)

    @property
    def is_zero(self):
        return not any(self.g) and not any(self.q)

    def scaled(self, lam):
        return Charges(tuple(lam * x for x in self.g), tuple(lam * x for x in self.q))


@dataclass(frozen=True)
class ModelSpec:
    kahler: KahlerModel
    superpotential: Polynomial
    gauge: GaugeCouplings
    charges: Charges = field(default=None)

    def __post_init__(self):
        n_c = self.kahler.n_c
        if self.superpotential.n != n_c or self.gauge.n_c != n_c:
            raise ValueError("superpotential/gauge couplings disagree with Kähler n_c")
        if self.charges is not None and len(self.charges.g) != self.gauge.n_v:
            raise ValueError("charges length differs from n_v")

    @property
    def n_c(self):
        return self.kahler.n_c

    @property
    def n_v(self):
        return self.gauge.n_v
