"""Energy density T_00, the radial energy integral and its finiteness verdict."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from .backgrounds import Asymptotic
from .errors import OutOfDomain, ProfileGap
from .kahler import metric
from .potentials import bh_potential, scalar_potential

V0_TOL = 1e-12
DIVERGENCE_DOUBLINGS = 6
FOUR_PI = 4.0 * math.pi


@dataclass(frozen=True)
class EnergyReport:
    finite_part: float
    tail_estimate: float | str
    L: float
    verdict: str
    v0_at_infinity: float
    r0: float = float("nan")
    tail_increments: tuple = ()

    @property
    def total(self):
        if self.verdict != "Finite":
            return math.inf
        return self.finite_part + self.tail_estimate

    def to_json(self):
        return {
            "finite_part": self.finite_part,
            "tail_estimate": self.tail_estimate if self.verdict == "Finite" else "divergent",
            "L": self.L,
            "verdict": self.verdict,
            "v0_at_infinity": self.v0_at_infinity,
        }


def _kinetic(model, state):
    g = metric(model.kahler, state.phi)
    return float(np.real(state.pi @ g @ np.conj(state.pi)))


def t00(model, charges, background, r, state):
    """T_00 = e^{A-B} g phi' conj(phi') + e^{A-2C} V_BH + e^A V."""
    background.check(r)
    A, B, C = background.metric(r)
    kin = _kinetic(model, state) if np.any(state.pi) else 0.0
    return (math.exp(A - B) * kin
            + math.exp(A - 2 * C) * bh_potential(model, state.phi, charges)
            + math.exp(A) * scalar_potential(model, state.phi))


def energy_density(model, charges, background, r, state):
    """Radial integrand 4 pi e^{B/2 + A + C} (e^{-B} g phi' conj(phi') + e^{-2C} V_BH + V)."""
    A, B, C = background.metric(r)
    kin = _kinetic(model, state) if np.any(state.pi) else 0.0
    return FOUR_PI * math.exp(0.5 * B + A + C) * (
        math.exp(-B) * kin + math.exp(-2 * C) * bh_potential(model, state.phi, charges)
        + scalar_potential(model, state.phi))


def _frozen_state(phi0):
    from .flow import PhaseState

    phi0 = np.atleast_1d(np.asarray(phi0, complex))
    return PhaseState(phi0, np.zeros_like(phi0))


def _check_cover(profile, L):
    r0, r1 = profile.interval
    if not r0 < L <= r1 + 1e-12 * max(1.0, abs(r1)):
        raise ProfileGap(f"profile covers [{r0}, {r1}] but the energy needs [{r0}, {L}]")
    return r0


def _segments(profile, L):
    r0 = profile.r[0]
    pts = [float(x) for x in profile.r if r0 < x < L]
    return [r0] + pts + [L]


def finite_energy(model, charges, background, profile, L):
    """int_{r0}^{L} of the energy density along the profile's interpolant."""
    _check_cover(profile, L)

    def f(r):
        return energy_density(model, charges, background, r, profile.state_at(r))

    edges = _segments(profile, L)
    return float(sum(quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=100)[0] for a, b in zip(edges[:-1], edges[1:])))


def _tail_integrand(model, charges, background, phi0, include_v):
    state = _frozen_state(phi0)
    v_bh = bh_potential(model, state.phi, charges)
    v = scalar_potential(model, state.phi) if include_v else 0.0

    def f(r):
        A, B, C = background.metric(r)
        return FOUR_PI * math.exp(0.5 * B + A + C) * (math.exp(-2 * C) * v_bh + v)
    return f


def tail_increments(f, L, doublings=DIVERGENCE_DOUBLINGS):
    """Partial integrals of f over [2^(k-1) L, 2^k L], k = 1..doublings."""
    return tuple(quad(f, L * 2 ** (k - 1), L * 2 ** k, epsabs=0, epsrel=1e-12, limit=200)[0]
                 for k in range(1, doublings + 1))


def looks_divergent(increments):
    mags = np.abs(increments)
    return bool(mags[0] > 0 and np.all(mags[1:] >= mags[:-1]))


def tail_energy(model, charges, background, phi0, L):
    """(tail value or 'divergent', increments, V(phi0)) for frozen fields beyond L."""
    if not isinstance(background, Asymptotic) or background.domain[1] != math.inf:
        raise OutOfDomain("the energy tail needs an Asymptotic background extending to infinity")
    v0 = scalar_potential(model, np.atleast_1d(np.asarray(phi0, complex)))
    vanished = abs(v0) <= V0_TOL
    f = _tail_integrand(model, charges, background, phi0, include_v=not vanished)
    inc = tail_increments(f, L)
    if not vanished or looks_divergent(inc):
        return "divergent", inc, v0
    val, _ = quad(f, L, np.inf, epsabs=1e-15, epsrel=1e-12, limit=200)
    return float(val), inc, v0


def energy(model, charges, background, profile, L, phi0=None):
    """Energy report: finite part on [r0, L] plus the frozen-field tail on [L, inf).

    The fields are frozen at ``phi0`` beyond L (default: the profile value at
    L). Any V(phi0) above 1e-12 in magnitude makes the tail diverge.
    """
    r0 = _check_cover(profile, L)
    if phi0 is None:
        phi0 = profile.phi_at(L)
    fp = finite_energy(model, charges, background, profile, L)
    tail, inc, v0 = tail_energy(model, charges, background, phi0, L)
    verdict = "Divergent" if tail == "divergent" else "Finite"
    return EnergyReport(finite_part=fp, tail_estimate=tail, L=float(L), verdict=verdict,
                        v0_at_infinity=float(v0), r0=float(r0), tail_increments=inc)


def energy_bound_check(report, profile, model, charges, background, L, phi0=None, nodes=12):
    """E <= sup_{r in [r0, L]} |int_{r0}^r density| + C0, with C0 = |tail|.

    The cumulative integral is recomputed with a fixed Gauss-Legendre rule on
    each sample interval, independently of the report's own quadrature.
    """
    if report.verdict != "Finite":
        return False
    if phi0 is None:
        phi0 = profile.phi_at(L)
    t, w = np.polynomial.legendre.leggauss(nodes)
    edges = _segments(profile, L)
    cum = 0.0
    sup = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        xs = 0.5 * (b - a) * (t + 1) + a
        vals = [energy_density(model, charges, background, x, profile.state_at(x)) for x in xs]
        cum += 0.5 * (b - a) * float(np.dot(w, vals))
        sup = max(sup, abs(cum))
    tail, _, _ = tail_energy(model, charges, background, phi0, L)
    if tail == "divergent":
        return False
    bound = sup + abs(tail)
    return bool(report.finite_part + report.tail_estimate <= bound + 1e-9)
