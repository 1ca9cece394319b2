"""Critical points of V, V_BH and V_eff by damped Newton in real coordinates."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence
from .potentials import bh_potential_grad, effective_potential_grad, real_gradient, scalar_potential_grad


class Which(str, enum.Enum):
    ScalarV = "ScalarV"
    BlackHoleV = "BlackHoleV"
    EffectiveV = "EffectiveV"


@dataclass(frozen=True)
class CriticalPoint:
    phi_star: np.ndarray
    which: Which
    grad_norm: float
    hessian_signature: tuple
    converged: bool
    iterations: int = 0
    grad_history: tuple = ()

    def to_json(self):
        return {
            "which": self.which.value,
            "phi_re": [float(x) for x in self.phi_star.real],
            "phi_im": [float(x) for x in self.phi_star.imag],
            "grad_norm": self.grad_norm,
            "hessian_signature": list(self.hessian_signature),
            "converged": self.converged,
            "iterations": self.iterations,
        }


def gradient_function(model, charges, which):
    which = Which(which)
    if which is Which.ScalarV:
        return lambda phi: scalar_potential_grad(model, phi)
    if which is Which.BlackHoleV:
        return lambda phi: bh_potential_grad(model, phi, charges)
    return lambda phi: effective_potential_grad(model, phi, charges)


def _real(x):
    n = len(x) // 2
    return x[:n] + 1j * x[n:]


def real_hessian(grad, x, step=1e-4):
    """Symmetrised central-difference Jacobian of the real gradient."""
    d = len(x)
    H = np.empty((d, d))
    for j in range(d):
        e = np.zeros(d)
        e[j] = step
        H[:, j] = (real_gradient(grad(_real(x + e))) - real_gradient(grad(_real(x - e)))) / (2 * step)
    return 0.5 * (H + H.T)


def signature(H, rel_tol=1e-6):
    ev = np.linalg.eigvalsh(H)
    scale = max(1.0, float(np.max(np.abs(ev)))) if ev.size else 1.0
    zero = np.abs(ev) <= rel_tol * scale
    return int(np.sum((ev > 0) & ~zero)), int(np.sum((ev < 0) & ~zero)), int(np.sum(zero))


def find_critical(model, charges, which, phi_init, tol=1e-10, max_iters=100, hess_step=1e-4, armijo=1e-4,
                  max_norm=1e3):
    """Damped Newton on the real gradient of the chosen potential.

    Steps are halved (at most 30 times) until |grad|^2 satisfies the Armijo
    decrease; if the Newton direction cannot be damped into a decrease the
    Gauss-Newton direction -H grad is tried before giving up. Iterates with
    |phi| > max_norm count as a runaway: potentials that flatten at large
    field values would otherwise "converge" at infinity.
    """
    which = Which(which)
    grad = gradient_function(model, charges, which)
    x = np.concatenate([np.real(phi_init), np.imag(phi_init)]).astype(float)
    g = real_gradient(grad(_real(x)))
    gn = float(np.linalg.norm(g))
    history = [gn]
    it = 0
    while gn > tol:
        if it >= max_iters:
            raise NoConvergence(f"{which.value}: |grad| = {gn:.3e} after {max_iters} Newton steps")
        it += 1
        with np.errstate(all="ignore"):
            H = real_hessian(grad, x, hess_step)
        if not np.all(np.isfinite(H)):
            raise NoConvergence(f"{which.value}: Hessian is not finite at |phi| = {np.linalg.norm(x):.3e}")
        newton = -np.linalg.lstsq(H, g, rcond=None)[0]
        accepted = False
        for direction in (newton, -H @ g):
            t = 1.0
            for _ in range(31):
                with np.errstate(all="ignore"):
                    g_try = real_gradient(grad(_real(x + t * direction)))
                if g_try @ g_try <= (1.0 - 2.0 * armijo * t) * (g @ g):
                    accepted = True
                    break
                t *= 0.5
            if accepted:
                break
        if not accepted:
            raise NoConvergence(f"{which.value}: line search failed at |grad| = {gn:.3e}")
        x = x + t * direction
        g = g_try
        if np.max(np.abs(x)) > max_norm:
            raise NoConvergence(f"{which.value}: runaway to |phi| > {max_norm:g}")
        gn = float(np.linalg.norm(g))
        history.append(gn)
    H = real_hessian(grad, x, hess_step)
    return CriticalPoint(
        phi_star=_real(x), which=which, grad_norm=gn, hessian_signature=signature(H),
        converged=True, iterations=it, grad_history=tuple(history),
    )


@dataclass(frozen=True)
class FrozenPairReport:
    asymptotic_ok: bool
    horizon_ok: bool
    coincide: bool
    grad_v_at_phi0: float
    grad_vbh_at_phi0: float
    grad_veff_at_phi_h: float

    def to_json(self):
        return dict(self.__dict__)


def check_frozen_pair(model, charges, phi0, phi_h, tol):
    """Boundary conditions: phi0 critical for V and V_BH, phi_h critical for V_eff."""
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    phi0 = np.atleast_1d(np.asarray(phi0, complex))
    phi_h = np.atleast_1d(np.asarray(phi_h, complex))
    gv = float(np.linalg.norm(scalar_potential_grad(model, phi0)))
    gb = float(np.linalg.norm(bh_potential_grad(model, phi0, charges)))
    ge = float(np.linalg.norm(effective_potential_grad(model, phi_h, charges)))
    return FrozenPairReport(
        asymptotic_ok=gv <= tol and gb <= tol,
        horizon_ok=ge <= tol,
        coincide=bool(np.linalg.norm(phi0 - phi_h) <= tol),
        grad_v_at_phi0=gv, grad_vbh_at_phi0=gb, grad_veff_at_phi_h=ge,
    )
