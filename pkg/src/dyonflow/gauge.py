"""Dyonic field strengths on the static ansatz and their closure residuals.

Coordinates are (t, r, theta, varphi). The orientation is fixed by
eps_{0123} = +sqrt(-g); with it the closed-form field strengths satisfy the
gauge equation for any radial scalar profile, not only frozen ones (the
electric flux density G_23 / sin(theta) stays at -q/2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .potentials import gauge_matrices


@dataclass(frozen=True)
class FieldStrengthSample:
    r: float
    theta: float
    F01: np.ndarray
    F23: np.ndarray


@dataclass(frozen=True)
class DualSample:
    """Components of G_a = k F - h *F (the "electric" field strength)."""

    r: float
    theta: float
    G01: np.ndarray
    G23: np.ndarray


def _phi_at(phi, r):
    return np.atleast_1d(np.asarray(phi(r) if callable(phi) else phi, complex))


def field_strengths(model, phi, charges, background, r, theta):
    """F^a_01 = 1/2 e^{(A+B)/2 - C} h^-1 (k g - q),  F^a_23 = -1/2 g sin(theta)."""
    background.check(r)
    h, k = gauge_matrices(model, _phi_at(phi, r))
    A, B, C = background.metric(r)
    g = np.array(charges.g)
    q = np.array(charges.q)
    F01 = 0.5 * math.exp(0.5 * (A + B) - C) * np.linalg.solve(h, k @ g - q)
    F23 = -0.5 * g * math.sin(theta)
    return FieldStrengthSample(r, theta, F01, F23)


def hodge_dual(sample, background):
    """(*F)_01 and (*F)_23 on the diagonal metric, eps_{0123} = +sqrt(-g)."""
    A, B, C = background.metric(sample.r)
    s = math.sin(sample.theta)
    dual01 = math.exp(0.5 * (A + B) - C) * sample.F23 / s if s else np.zeros_like(sample.F23)
    dual23 = -math.exp(C - 0.5 * (A + B)) * s * sample.F01
    return dual01, dual23


def dual_tensor(model, phi, charges, background, r, theta, fields=None):
    sample = fields(r, theta) if fields else field_strengths(model, phi, charges, background, r, theta)
    h, k = gauge_matrices(model, _phi_at(phi, r))
    d01, d23 = hodge_dual(sample, background)
    return DualSample(r, theta, k @ sample.F01 - h @ d01, k @ sample.F23 - h @ d23)


def residual_gauge_eom(model, phi_profile, charges, background, grid, fields=None):
    """Max residual of dG = 0, dF = 0 and the flux normalisation on a grid.

    ``grid`` is ``(r_values, theta_values)``, both uniform. The closure
    conditions reduce to d_r X_23 = 0 and d_theta X_01 = 0 for X in {F, G},
    taken with second-order central differences. Closure alone cannot see a
    constant rescaling, so the fluxes X_23 / sin(theta) are also compared
    against -g/2 and -q/2. ``fields(r, theta)`` may override the closed-form
    field strengths (used to test the detector).
    """
    rs, ths = (np.asarray(x, float) for x in grid)
    for r in rs:
        background.check(r)
    if len(rs) < 3 or len(ths) < 3:
        raise ValueError("residual grid needs at least 3 points per axis")
    if charges.is_zero and fields is None:
        return 0.0
    n_v = model.n_v
    F01 = np.empty((len(rs), len(ths), n_v))
    F23 = np.empty_like(F01)
    G01 = np.empty_like(F01)
    G23 = np.empty_like(F01)
    for i, r in enumerate(rs):
        for j, th in enumerate(ths):
            s = fields(r, th) if fields else field_strengths(model, phi_profile, charges, background, r, th)
            d = dual_tensor(model, phi_profile, charges, background, r, th, fields=lambda *_: s)
            F01[i, j], F23[i, j], G01[i, j], G23[i, j] = s.F01, s.F23, d.G01, d.G23
    res = 0.0
    for X01, X23 in ((F01, F23), (G01, G23)):
        res = max(res, np.max(np.abs(np.gradient(X23, rs, axis=0, edge_order=2))))
        res = max(res, np.max(np.abs(np.gradient(X01, ths, axis=1, edge_order=2))))
    sin = np.sin(ths)[None, :, None]
    mask = np.abs(sin[0, :, 0]) > 1e-8
    if mask.any():
        res = max(res, np.max(np.abs(F23[:, mask] / sin[:, mask] + 0.5 * np.array(charges.g))))
        res = max(res, np.max(np.abs(G23[:, mask] / sin[:, mask] + 0.5 * np.array(charges.q))))
    return float(res)
