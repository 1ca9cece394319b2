"""Scalar, black-hole and effective potentials with Wirtinger gradients.

All gradients are holomorphic Wirtinger derivatives d/dphi^i at fixed
conj(phi). For a real function V the real-coordinate gradient with respect to
(Re phi, Im phi) is (2 Re dV, -2 Im dV); see :func:`real_gradient`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._sampling import complex_ball
from .errors import ComplexBranch, SingularH
from .kahler import inverse_metric, metric

# below this |4 V_BH V| the effective potential uses its Taylor series
SERIES_SWITCH = 1e-8
IMAG_TOL = 1e-12


def _as_phi(model, phi):
    phi = np.atleast_1d(np.asarray(phi, complex))
    if phi.shape != (model.n_c,):
        raise ValueError(f"expected {model.n_c} scalar fields, got shape {phi.shape}")
    return phi


def real_gradient(grad):
    """Map a Wirtinger gradient to the gradient in (Re phi, Im phi)."""
    grad = np.asarray(grad, complex)
    return np.concatenate([2 * grad.real, -2 * grad.imag])


# scalar potential ---------------------------------------------------------

def _covariant_w(model, phi):
    W = model.superpotential(phi)
    dW = model.superpotential.grad(phi)
    Ki = model.kahler.potential_grad(phi)
    return W, dW, Ki, dW + Ki * W


def scalar_potential(model, phi):
    """V = e^K (g^{i jbar} D_i W conj(D_j W) - 3 |W|^2)."""
    phi = _as_phi(model, phi)
    ginv = inverse_metric(model.kahler, phi)
    W, _, _, DW = _covariant_w(model, phi)
    # g^{i jbar} a_i conj(b_j) = b^H ginv a
    val = np.exp(model.kahler.potential(phi)) * (np.vdot(DW, ginv @ DW) - 3 * W * np.conj(W))
    if abs(val.imag) > IMAG_TOL * max(1.0, abs(val.real)):
        raise ArithmeticError(f"scalar potential picked up imaginary part {val.imag:.3e}")
    return float(val.real)


def scalar_potential_grad(model, phi):
    """Holomorphic gradient dV/dphi^i."""
    phi = _as_phi(model, phi)
    kah = model.kahler
    if model.superpotential.is_zero:
        return np.zeros(model.n_c, complex)
    G = metric(kah, phi)
    ginv = inverse_metric(kah, phi)
    dG = kah.metric_derivative(phi)
    W, dW, Ki, DW = _covariant_w(model, phi)
    Kij = kah.potential_hessian_holo(phi)
    ddW = model.superpotential.hessian(phi)
    eK = np.exp(kah.potential(phi))
    V = eK * (np.vdot(DW, ginv @ DW).real - 3 * abs(W) ** 2)

    # N = sum_ij X[i,j] D_i conj(D_j) with X = ginv^T
    X = ginv.T
    cDW = np.conj(DW)
    out = np.empty(model.n_c, complex)
    for k in range(model.n_c):
        dX = -X @ dG[k].T @ X
        dD = ddW[k] + Kij[k] * W + Ki * dW[k]
        dcD = G[k] * np.conj(W)
        dN = DW @ dX @ cDW + dD @ X @ cDW + DW @ X @ dcD
        out[k] = Ki[k] * V + eK * (dN - 3 * dW[k] * np.conj(W))
    return out


# gauge sector ---------------------------------------------------------------

def gauge_matrices(model, phi):
    """Return ``(h, k) = (Re f, Im f)``; raises SingularH if h is singular."""
    phi = _as_phi(model, phi)
    f = model.gauge.f(phi)
    h, k = f.real.copy(), f.imag.copy()
    if np.linalg.cond(h) > 1e14 or not np.all(np.isfinite(h)):
        raise SingularH("Re f_ab is not invertible at this point")
    return h, k


def _bh_blocks(h, k, hinv):
    return np.block([[h + k @ hinv @ k, -k @ hinv], [-hinv @ k, hinv]])


def bh_matrix(model, phi):
    """The 2n_v x 2n_v symmetric matrix of the black-hole quadratic form."""
    h, k = gauge_matrices(model, phi)
    hinv = np.linalg.inv(h)
    M = _bh_blocks(h, k, hinv)
    return 0.5 * (M + M.T)


def bh_potential(model, phi, charges):
    """V_BH = -1/2 (g, q) M (g, q)^T."""
    if charges.is_zero:
        gauge_matrices(model, phi)
        return 0.0
    v = charges.vector
    return float(-0.5 * v @ bh_matrix(model, phi) @ v)


def bh_potential_grad(model, phi, charges):
    phi = _as_phi(model, phi)
    h, k = gauge_matrices(model, phi)
    if charges.is_zero or model.gauge.is_constant:
        return np.zeros(model.n_c, complex)
    hinv = np.linalg.inv(h)
    df = model.gauge.df(phi)
    v = charges.vector
    out = np.empty(model.n_c, complex)
    for i in range(model.n_c):
        # h = (f + conj f)/2, k = (f - conj f)/(2i); only f carries d_i
        dh = 0.5 * df[i]
        dk = -0.5j * df[i]
        dhinv = -hinv @ dh @ hinv
        dM = np.block([
            [dh + dk @ hinv @ k + k @ dhinv @ k + k @ hinv @ dk, -dk @ hinv - k @ dhinv],
            [-dhinv @ k - hinv @ dk, dhinv],
        ])
        out[i] = -0.5 * v @ dM @ v
    return out


# effective potential ------------------------------------------------------

def _discriminant(v_bh, v):
    disc = 1.0 - 4.0 * v_bh * v
    if disc < 0:
        raise ComplexBranch(f"1 - 4 V_BH V = {disc:.6g} < 0")
    return disc


def effective_potential(v_bh, v):
    """V_eff = (1 - sqrt(1 - 4 V_BH V)) / (2 V).

    Evaluated as 2 V_BH / (1 + sqrt(1 - 4 V_BH V)), which is the same
    expression without the 0/0 at V = 0; tiny products use the series
    V_BH (1 + x + 2 x^2) with x = V_BH V.
    """
    x = v_bh * v
    disc = _discriminant(v_bh, v)
    if abs(4 * x) < SERIES_SWITCH:
        return v_bh * (1.0 + x + 2.0 * x * x)
    return 2.0 * v_bh / (1.0 + np.sqrt(disc))


def effective_partials(v_bh, v):
    """(dV_eff/dV_BH, dV_eff/dV) = (1/s, V_eff^2/s) with s = sqrt(disc)."""
    s = np.sqrt(_discriminant(v_bh, v))
    if s == 0:
        raise ComplexBranch("discriminant vanishes; effective potential not differentiable")
    e = effective_potential(v_bh, v)
    return 1.0 / s, e * e / s


def effective_potential_at(model, phi, charges):
    return effective_potential(bh_potential(model, phi, charges), scalar_potential(model, phi))


def effective_potential_grad(model, phi, charges):
    a, b = effective_partials(bh_potential(model, phi, charges), scalar_potential(model, phi))
    return a * bh_potential_grad(model, phi, charges) + b * scalar_potential_grad(model, phi)


def ell_inverse(v_bh, v):
    """Near-horizon constant 1/ell = V_eff / sqrt(1 - 4 V_BH V)."""
    s = np.sqrt(_discriminant(v_bh, v))
    if s == 0:
        raise ComplexBranch("discriminant vanishes at the horizon point")
    return effective_potential(v_bh, v) / s


# Lipschitz estimates ------------------------------------------------------

@dataclass(frozen=True)
class LipschitzEstimate:
    C4: float
    C5: float
    ball_center: tuple
    ball_radius: float
    samples: int
    safety: float = 1.5
    observed_C4: float = 0.0
    observed_C5: float = 0.0


def sample_pairs(n_c, center, radius, samples, seed=0):
    """Half local pairs (separation ~1e-3 radius), half far pairs, all in the ball."""
    pts = complex_ball(n_c, radius, 2 * samples, seed=seed, center=center)
    a, b = pts[:samples], pts[samples:]
    n_local = samples // 2
    center = np.asarray(center, complex)
    step = b[:n_local] - center
    norms = np.linalg.norm(step, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    local = a[:n_local] + 1e-3 * radius * step / norms
    # pull back anything pushed past the boundary
    off = local - center
    r = np.linalg.norm(off, axis=1, keepdims=True)
    local = np.where(r > radius, center + off * (radius / r), local)
    b = np.vstack([local, b[n_local:]])
    return a, b


def lipschitz_estimate(model, charges, center, radius, samples, safety=1.5, seed=0):
    """Empirical local Lipschitz constants of dV_BH (C4) and dV (C5)."""
    if samples < 2:
        raise ValueError("need at least two samples")
    center = _as_phi(model, center)
    a, b = sample_pairs(model.n_c, center, radius, samples, seed=seed)
    q4 = q5 = 0.0
    skip_bh = charges.is_zero or model.gauge.is_constant
    skip_v = model.superpotential.is_zero
    for x, y in zip(a, b):
        d = np.linalg.norm(x - y)
        if d == 0:
            continue
        if not skip_bh:
            q4 = max(q4, np.linalg.norm(bh_potential_grad(model, x, charges) - bh_potential_grad(model, y, charges)) / d)
        if not skip_v:
            q5 = max(q5, np.linalg.norm(scalar_potential_grad(model, x) - scalar_potential_grad(model, y)) / d)
    return LipschitzEstimate(
        C4=float(safety * q4), C5=float(safety * q5), ball_center=tuple(center), ball_radius=float(radius),
        samples=int(samples), safety=float(safety), observed_C4=float(q4), observed_C5=float(q5),
    )
