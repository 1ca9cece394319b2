"""Radial metric backgrounds ds^2 = -e^A dt^2 + e^B dr^2 + e^C dOmega^2.

Three variants share one interface (``metric``, ``metric_prime``,
``domain``):

* :class:`Asymptotic` - the lapse Lambda(r) = 1 + 2 eta/r + V_BH0/r^2 - V0 r^2/3
  with A = -B = ln Lambda, C = 2 ln r;
* :class:`NearHorizon` - the AdS2 x S2 product e^A = x^2/v1, e^B = v1/x^2,
  e^C = v2 with x = r - r_h;
* :class:`Tabulated` - spline interpolation of a table of (r, A, B, C).

The scalar equation uses the friction coefficient F = (A' - B' + 2 C')/2,
which is what the volume element e^{(A+B)/2 + C} sin(theta) produces.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import make_interp_spline

from .errors import ComplexBranch, HorizonSingularity, IoError, NonPositiveLambda, OutOfDomain, ParseError
from .potentials import bh_potential, effective_potential, scalar_potential


@dataclass(frozen=True)
class OdeCoefficients:
    F: float
    G: float
    H: float


def asymptotic_lambda(eta, vbh0, v0, r):
    return 1.0 + 2.0 * eta / r + vbh0 / r**2 - v0 * r**2 / 3.0


def _lambda_prime(eta, vbh0, v0, r):
    return -2.0 * eta / r**2 - 2.0 * vbh0 / r**3 - 2.0 * v0 * r / 3.0


class Background:
    domain: tuple

    def check(self, r):
        lo, hi = self.domain
        if not (lo <= r <= hi):
            raise OutOfDomain(f"r = {r} outside background domain [{lo}, {hi}]")

    def metric(self, r):
        """(A, B, C) at r."""
        raise NotImplementedError

    def metric_prime(self, r):
        """(A', B', C') at r."""
        raise NotImplementedError


@dataclass(frozen=True)
class Asymptotic(Background):
    eta: float = 0.0
    vbh0: float = 0.0
    v0: float = 0.0
    domain: tuple = (1.0, math.inf)

    def __post_init__(self):
        lo, hi = (float(x) for x in self.domain)
        object.__setattr__(self, "domain", (lo, hi))
        if not 0 < lo < hi:
            raise ValueError("asymptotic domain needs 0 < r_lo < r_hi")
        if self.lapse(lo) <= 0:
            raise NonPositiveLambda(f"Lambda(r_lo) = {self.lapse(lo):.6g} <= 0")
        for root in self._lapse_roots():
            if lo <= root <= hi:
                raise NonPositiveLambda(f"Lambda vanishes at r = {root:.6g} inside the domain")

    def _lapse_roots(self):
        # r^2 Lambda = -v0/3 r^4 + r^2 + 2 eta r + vbh0
        roots = np.roots([-self.v0 / 3.0, 0.0, 1.0, 2.0 * self.eta, self.vbh0])
        return [float(z.real) for z in roots if abs(z.imag) < 1e-12 and z.real > 0]

    def lapse(self, r):
        return asymptotic_lambda(self.eta, self.vbh0, self.v0, r)

    def metric(self, r):
        lam = self.lapse(r)
        return math.log(lam), -math.log(lam), 2.0 * math.log(r)

    def metric_prime(self, r):
        ratio = _lambda_prime(self.eta, self.vbh0, self.v0, r) / self.lapse(r)
        return ratio, -ratio, 2.0 / r

    def lapse_positive_to_infinity(self, r):
        return self.lapse(r) > 0 and not any(root >= r for root in self._lapse_roots())


@dataclass(frozen=True)
class NearHorizon(Background):
    r_h: float
    ell_inv: float
    v2: float
    v1: float
    domain: tuple = None

    def __post_init__(self):
        if self.r_h <= 0 or self.v1 <= 0 or self.v2 <= 0:
            raise ValueError("near-horizon data needs r_h, v1, v2 > 0")
        dom = self.domain if self.domain is not None else (self.r_h, math.inf)
        dom = (float(dom[0]), float(dom[1]))
        if dom[0] < self.r_h:
            raise ValueError("near-horizon domain must lie outside the horizon")
        object.__setattr__(self, "domain", dom)

    def check(self, r):
        if r == self.r_h:
            raise HorizonSingularity("coefficients are singular at r = r_h")
        super().check(r)
        if r <= self.r_h:
            raise OutOfDomain(f"r = {r} is not outside the horizon r_h = {self.r_h}")

    def metric(self, r):
        lx = math.log(r - self.r_h)
        return 2 * lx - math.log(self.v1), math.log(self.v1) - 2 * lx, math.log(self.v2)

    def metric_prime(self, r):
        x = r - self.r_h
        return 2.0 / x, -2.0 / x, 0.0


@dataclass(frozen=True)
class Tabulated(Background):
    r: tuple
    A: tuple
    B: tuple
    C: tuple
    order: int = 3
    domain: tuple = field(default=None)

    def __post_init__(self):
        arrs = [tuple(float(x) for x in getattr(self, k)) for k in ("r", "A", "B", "C")]
        if len({len(a) for a in arrs}) != 1:
            raise ValueError("table columns must have equal length")
        if self.order < 3:
            raise ValueError("interpolation order must be at least 3 (C^2)")
        if len(arrs[0]) < self.order + 1:
            raise ValueError("table too short for the interpolation order")
        if np.any(np.diff(arrs[0]) <= 0):
            raise ValueError("table radii must be strictly increasing")
        for k, a in zip(("r", "A", "B", "C"), arrs):
            object.__setattr__(self, k, a)
        dom = self.domain if self.domain is not None else (arrs[0][0], arrs[0][-1])
        if dom[0] < arrs[0][0] or dom[1] > arrs[0][-1]:
            raise ValueError("domain exceeds the tabulated range")
        object.__setattr__(self, "domain", (float(dom[0]), float(dom[1])))

    @cached_property
    def _splines(self):
        r = np.asarray(self.r)
        return [make_interp_spline(r, np.asarray(getattr(self, k)), k=self.order) for k in ("A", "B", "C")]

    def metric(self, r):
        return tuple(float(s(r)) for s in self._splines)

    def metric_prime(self, r):
        return tuple(float(s.derivative()(r)) for s in self._splines)


def coefficients(background, r):
    """F, G, H at radius r."""
    background.check(r)
    A, B, C = background.metric(r)
    dA, dB, dC = background.metric_prime(r)
    return OdeCoefficients(F=0.5 * (dA - dB + 2.0 * dC), G=math.exp(B - 2.0 * C), H=math.exp(B))


def near_horizon_from_attractor(model, charges, phi_h, domain=None):
    """AdS2 x S2 background built from the potentials at the horizon point.

    Sets 1/ell = V_eff/s (s = sqrt(1 - 4 V_BH V)), the sphere factor
    v2 = r_h^2 = |V_eff| and v1 = |V_eff|^3 / s^2. With these values the
    radial equation is solved exactly by the logarithmic horizon profile
    whenever V_eff < 0 at the horizon.
    """
    v_bh = bh_potential(model, phi_h, charges)
    v = scalar_potential(model, phi_h)
    disc = 1.0 - 4.0 * v_bh * v
    if disc <= 0:
        raise ComplexBranch(f"1 - 4 V_BH V = {disc:.6g} is not positive at the horizon point")
    s = math.sqrt(disc)
    e = effective_potential(v_bh, v)
    if e == 0:
        raise ValueError("V_eff vanishes at the horizon point; horizon radius is zero")
    v2 = abs(e)
    return NearHorizon(r_h=math.sqrt(v2), ell_inv=e / s, v2=v2, v1=abs(e) ** 3 / disc, domain=domain)


def pq_profiles(background, r_grid):
    """Sampled P(r) and Q(r) for an Asymptotic background.

    P(r) = (1/r) int_r^inf (t - r) t^-3 / Lambda(t) dt   (P -> 0 at infinity)
    Q(r) = int_{r_lo}^r (r - t) t / Lambda(t) dt          (Q = Q' = 0 at r_lo)
    which are the double integrals written as single ones.
    """
    if not isinstance(background, Asymptotic):
        raise TypeError("P/Q profiles need an Asymptotic background")
    r_grid = np.atleast_1d(np.asarray(r_grid, float))
    r_lo = background.domain[0]
    lam = background.lapse
    if np.any(lam(r_grid) <= 0) or not background.lapse_positive_to_infinity(r_lo):
        raise NonPositiveLambda("Lambda must stay positive from r_lo to infinity")
    P = np.empty_like(r_grid)
    Q = np.empty_like(r_grid)
    for n, r in enumerate(r_grid):
        p1, _ = quad(lambda t: t ** -3 / lam(t), r, np.inf, epsabs=0, epsrel=1e-13, limit=200)
        p2, _ = quad(lambda t: t ** -2 / lam(t), r, np.inf, epsabs=0, epsrel=1e-13, limit=200)
        P[n] = (p2 - r * p1) / r
        if r == r_lo:
            Q[n] = 0.0
        else:
            Q[n], _ = quad(lambda t: (r - t) * t / lam(t), r_lo, r, epsabs=0, epsrel=1e-13, limit=200)
    return P, Q


def load_table(path, order=3, domain=None):
    """Read a whitespace table with columns r, A, B, C ('#' starts a comment)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read background table {path}: {exc}") from exc
    rows = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ParseError(f"{path}:{lineno}: expected 4 columns (r A B C), got {len(parts)}")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from exc
    if not rows:
        raise ParseError(f"{path}: empty background table")
    arr = np.array(rows)
    return Tabulated(tuple(arr[:, 0]), tuple(arr[:, 1]), tuple(arr[:, 2]), tuple(arr[:, 3]), order=order, domain=domain)
