"""Radial scalar flow u' = J(u, r) with u = (phi, pi), pi = phi'.

The complex system is realified to y = [Re phi, Im phi, Re pi, Im pi] and
every norm is the max norm over those 4 n_c real components.

Two independent integrators are provided: :func:`picard_solve` iterates the
integral operator K(u) = u0 + int J on a certified interval [r0, r0 + delta]
(contraction mapping), :func:`rk_solve` is an adaptive Dormand-Prince run
used as the oracle and for long-range continuation.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import legendre as L
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

from .backgrounds import Asymptotic, coefficients, near_horizon_from_attractor, pq_profiles
from .errors import (
    BallEscape,
    EmptySample,
    IllConditionedFit,
    MaxIters,
    NoContraction,
    NonPositive,
    OutOfDomain,
    StepUnderflow,
)
from .kahler import christoffel, metric
from .potentials import bh_potential_grad, effective_potential_grad, ell_inverse, bh_potential, scalar_potential, scalar_potential_grad

log = logging.getLogger(__name__)

CONTRACTION_MARGIN = 1e-9


@dataclass(frozen=True)
class PhaseState:
    phi: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "phi", np.atleast_1d(np.asarray(self.phi, complex)))
        object.__setattr__(self, "pi", np.atleast_1d(np.asarray(self.pi, complex)))
        if self.phi.shape != self.pi.shape:
            raise ValueError("phi and pi must have the same length")

    def to_real(self):
        return np.concatenate([self.phi.real, self.phi.imag, self.pi.real, self.pi.imag])

    @classmethod
    def from_real(cls, y):
        n = len(y) // 4
        return cls(y[:n] + 1j * y[n:2 * n], y[2 * n:3 * n] + 1j * y[3 * n:])

    def norm(self):
        return float(np.max(np.abs(self.to_real())))

    def conj(self):
        return PhaseState(np.conj(self.phi), np.conj(self.pi))


@dataclass
class SolverConfig:
    ball_radius: float = 1.0
    fixpoint_tol: float = 1e-12
    max_picard_iters: int = 200
    quadrature_order: int = 5
    panels: int = 8
    rk_rel_tol: float = 1e-12
    rk_abs_tol: float = 1e-14
    horizon_offset: float = 1e-3
    max_delta: float = 1.0
    lipschitz_samples: int = 200
    safety: float = 1.5
    max_halvings: int = 20
    seed: int = 0

    def __post_init__(self):
        if self.ball_radius <= 0 or self.fixpoint_tol <= 0:
            raise ValueError("ball_radius and fixpoint_tol must be positive")
        if self.fixpoint_tol >= self.ball_radius:
            raise ValueError("fixpoint_tol must be smaller than ball_radius")
        if self.horizon_offset <= 0:
            raise ValueError("horizon_offset must be positive")
        if self.rk_rel_tol <= 0 or self.rk_abs_tol <= 0:
            raise ValueError("RK tolerances must be positive")
        if self.quadrature_order < 1 or self.panels < 1:
            raise ValueError("quadrature order and panel count must be positive")


@dataclass(eq=False)
class FlowProfile:
    r: np.ndarray
    phi: np.ndarray
    pi: np.ndarray
    method: str
    delta_used: float
    contraction_factor: float | None = None
    lipschitz_CM: float | None = None
    iterate_distances: tuple = ()
    steps: list = field(default_factory=list)
    dense: object = field(default=None, repr=False)

    @property
    def states(self):
        return [PhaseState(p, q) for p, q in zip(self.phi, self.pi)]

    @property
    def interval(self):
        return float(self.r[0]), float(self.r[-1])

    def y_at(self, r):
        """Real state at r from the solver's own interpolant (Hermite fallback)."""
        if self.dense is not None:
            return np.asarray(self.dense(r), float)
        spline = CubicHermiteSpline(self.r, self.phi, self.pi, axis=0)
        phi = spline(r)
        pi = spline.derivative()(r)
        return PhaseState(phi, pi).to_real()

    def state_at(self, r):
        return PhaseState.from_real(self.y_at(r))

    def phi_at(self, r):
        return self.state_at(r).phi

    def to_json(self):
        return {
            "method": self.method,
            "delta_used": self.delta_used,
            "contraction_factor": self.contraction_factor,
            "samples": [
                {
                    "r": float(r),
                    "phi_re": [float(x) for x in p.real],
                    "phi_im": [float(x) for x in p.imag],
                    "pi_re": [float(x) for x in q.real],
                    "pi_im": [float(x) for x in q.imag],
                }
                for r, p, q in zip(self.r, self.phi, self.pi)
            ],
        }

    @classmethod
    def from_json(cls, payload):
        samples = payload["samples"]
        r = np.array([s["r"] for s in samples])
        phi = np.array([np.array(s["phi_re"]) + 1j * np.array(s["phi_im"]) for s in samples])
        pi = np.array([np.array(s["pi_re"]) + 1j * np.array(s["pi_im"]) for s in samples])
        return cls(r, phi, pi, payload["method"], payload["delta_used"], payload.get("contraction_factor"))

    def csv_rows(self):
        n = self.phi.shape[1]
        header = ["r"]
        for i in range(n):
            header += [f"phi_re_{i}", f"phi_im_{i}", f"pi_re_{i}", f"pi_im_{i}"]
        rows = []
        for r, p, q in zip(self.r, self.phi, self.pi):
            row = [float(r)]
            for i in range(n):
                row += [p[i].real, p[i].imag, q[i].real, q[i].imag]
            rows.append(row)
        return header, rows


# right-hand side ----------------------------------------------------------

def rhs(model, charges, background, r, state):
    """Derivative (phi', pi') of the flow at radius r.

    pi'^i = -F pi^i - Gamma^i_jk pi^j pi^k + g^{i kbar} (G d_kbar V_BH + H d_kbar V)
    """
    c = coefficients(background, r)
    phi, pi = state.phi, state.pi
    force = np.zeros(len(phi), complex)
    if c.G != 0:
        force = force + c.G * bh_potential_grad(model, phi, charges)
    if c.H != 0:
        force = force + c.H * scalar_potential_grad(model, phi)
    g = metric(model.kahler, phi)
    dpi = -c.F * pi + np.conj(np.linalg.solve(g, force))
    if model.kahler.family != "flat":
        dpi = dpi - np.einsum("ijk,j,k->i", christoffel(model.kahler, phi), pi, pi)
    return PhaseState(pi, dpi)


def _rhs_real(model, charges, background):
    def f(r, y):
        return rhs(model, charges, background, float(r), PhaseState.from_real(y)).to_real()
    return f


# contraction step ---------------------------------------------------------

def contraction_delta(C_M, M, j_norm_at_start):
    """delta = min(1/C_M, 1/(C_M M + |J(r_start)|))."""
    if C_M <= 0:
        raise NonPositive(f"Lipschitz constant must be positive, got {C_M}")
    if M <= 0 or j_norm_at_start < 0:
        raise NonPositive("ball radius must be positive and |J| nonnegative")
    return min(1.0 / C_M, 1.0 / (C_M * M + j_norm_at_start))


def _sample_state_pairs(d, center, M, samples, rng):
    """Pairs inside the max-norm ball B(center, M): far, local and vertex-direction."""
    a = center + M * rng.uniform(-1, 1, (samples, d))
    b = center + M * rng.uniform(-1, 1, (samples, d))
    third = samples // 3
    # local pairs along cube-vertex directions, where the max-norm quotient peaks
    signs = rng.choice([-1.0, 1.0], (third, d))
    sep = 1e-4 * M
    base = np.clip(a[:third], center - M + sep, center + M - sep)
    b[:third] = base + sep * signs
    a[:third] = base
    # local pairs along random directions
    dirs = rng.normal(size=(third, d))
    dirs /= np.max(np.abs(dirs), axis=1, keepdims=True)
    base2 = np.clip(a[third:2 * third], center - M + sep, center + M - sep)
    a[third:2 * third] = base2
    b[third:2 * third] = base2 + sep * dirs
    return a, b


def lipschitz_CM(model, charges, background, interval, M, samples, center=None, safety=1.5, seed=0):
    """Safety-inflated maximum of |J(r, u~) - J(r, u)| / |u~ - u| over sampled pairs.

    The ball is the max-norm ball of radius M around ``center`` (a real state
    vector, default the origin).
    """
    r_lo, r_hi = interval
    background.check(r_lo)
    background.check(r_hi)
    d = 4 * model.n_c
    center = np.zeros(d) if center is None else np.asarray(center, float)
    rng = np.random.default_rng(seed)
    a, b = _sample_state_pairs(d, center, M, samples, rng)
    rs = r_lo + (r_hi - r_lo) * rng.uniform(0, 1, samples)
    # the interval end with the strongest coefficients is always probed
    rs[: min(samples, 8)] = r_lo
    f = _rhs_real(model, charges, background)
    best = 0.0
    used = 0
    for r, x, y in zip(rs, a, b):
        dist = np.max(np.abs(x - y))
        if dist == 0:
            continue
        used += 1
        best = max(best, np.max(np.abs(f(r, x) - f(r, y))) / dist)
    if used == 0:
        raise EmptySample("every sampled pair coincides; Lipschitz quotient undefined")
    return safety * best


# Picard iteration on Gauss-Legendre panels ----------------------------------

class _Panels:
    def __init__(self, m):
        self.t, self.w = L.leggauss(m)
        V = L.legvander(self.t, m - 1)
        self.Vinv = np.linalg.inv(V)
        self.m = m
        self.S = self.int_rows(self.t)

    def int_rows(self, tau):
        """Rows mapping node values to int_{-1}^{tau} of the interpolant."""
        tau = np.atleast_1d(tau)
        cols = []
        for k in range(self.m):
            e = np.zeros(self.m)
            e[k] = 1.0
            cols.append(L.legval(tau, L.legint(e, lbnd=-1)))
        return np.stack(cols, axis=-1) @ self.Vinv


def _picard_iterate(f, r0, delta, u0, M, cfg, quad):
    P = cfg.panels
    h = delta / P
    edges = r0 + h * np.arange(P + 1)
    nodes = edges[:-1, None] + 0.5 * h * (quad.t[None, :] + 1.0)
    U = np.broadcast_to(u0, (P, quad.m, len(u0))).copy()
    starts = np.broadcast_to(u0, (P + 1, len(u0))).copy()
    dists = []
    for it in range(cfg.max_picard_iters):
        Jv = np.array([[f(nodes[p, i], U[p, i]) for i in range(quad.m)] for p in range(P)])
        new_starts = np.empty_like(starts)
        new_starts[0] = u0
        inc = 0.5 * h * np.einsum("i,pid->pd", quad.w, Jv)
        new_starts[1:] = u0 + np.cumsum(inc, axis=0)
        newU = new_starts[:-1, None, :] + 0.5 * h * np.einsum("ij,pjd->pid", quad.S, Jv)
        if np.max(np.abs(newU - u0)) > M or np.max(np.abs(new_starts - u0)) > M:
            raise BallEscape(f"Picard iterate {it + 1} left the ball |u - u0| <= {M}")
        dist = max(np.max(np.abs(newU - U)), np.max(np.abs(new_starts - starts)))
        dists.append(float(dist))
        U, starts = newU, new_starts
        if dist <= cfg.fixpoint_tol:
            # one more evaluation so the stored node derivatives match the final iterate
            Jv = np.array([[f(nodes[p, i], U[p, i]) for i in range(quad.m)] for p in range(P)])
            return edges, nodes, U, starts, Jv, dists
    raise MaxIters(f"Picard iteration did not reach {cfg.fixpoint_tol:g} in {cfg.max_picard_iters} sweeps")


def picard_solve(model, charges, background, r_start, u_start, config=None):
    """One certified Picard step from ``r_start``.

    Estimates C_M on the trial interval, takes delta from
    :func:`contraction_delta` (further capped by the self-map condition
    delta (sup|J(., u0)| + C_M M) <= M of the ball around u0), halves delta
    while C_M delta >= 1, then iterates K to the fixed point.
    """
    cfg = config or SolverConfig()
    background.check(r_start)
    u0 = u_start.to_real() if isinstance(u_start, PhaseState) else np.asarray(u_start, float)
    M = cfg.ball_radius
    f = _rhs_real(model, charges, background)
    trial = min(cfg.max_delta, background.domain[1] - r_start)
    if trial <= 0:
        raise OutOfDomain("no room left in the background domain")
    C_M = lipschitz_CM(model, charges, background, (r_start, r_start + trial), M, cfg.lipschitz_samples,
                       center=u0, safety=cfg.safety, seed=cfg.seed)
    j_start = float(np.max(np.abs(f(r_start, u0))))
    j_sup = max(float(np.max(np.abs(f(r, u0)))) for r in r_start + trial * np.linspace(0, 1, 9))
    if C_M == 0:
        # J independent of u: K maps the constant guess straight to the answer
        C_M = np.finfo(float).tiny
        delta = min(trial, M / max(j_sup, 1e-300))
    else:
        delta = min(contraction_delta(C_M, M, j_start), M / (C_M * M + j_sup), trial)
    halvings = 0
    # delta = 1/C_M exactly when J(., u0) = 0; rounding must not pass that off as a contraction
    while C_M * delta >= 1.0 - CONTRACTION_MARGIN:
        if halvings >= cfg.max_halvings:
            raise NoContraction(f"C_M * delta = {C_M * delta:.3g} >= 1 after {halvings} halvings")
        delta *= 0.5
        halvings += 1
    quad = _Panels(cfg.quadrature_order)
    edges, nodes, U, starts, Jv, dists = _picard_iterate(f, r_start, delta, u0, M, cfg, quad)

    rs = [edges[0]]
    ys = [starts[0]]
    for p in range(cfg.panels):
        rs.extend(nodes[p])
        ys.extend(U[p])
        rs.append(edges[p + 1])
        ys.append(starts[p + 1])
    rs = np.array(rs)
    ys = np.array(ys)
    h = delta / cfg.panels

    def dense(r):
        p = int(np.clip(np.searchsorted(edges, r, side="right") - 1, 0, cfg.panels - 1))
        tau = 2.0 * (r - edges[p]) / h - 1.0
        return starts[p] + 0.5 * h * (quad.int_rows(tau)[0] @ Jv[p])

    n = model.n_c
    factor = C_M * delta
    log.info("picard step r=[%.6g, %.6g] C_M=%.4g factor=%.4g sweeps=%d", r_start, r_start + delta, C_M, factor, len(dists))
    return FlowProfile(
        r=rs, phi=ys[:, :n] + 1j * ys[:, n:2 * n], pi=ys[:, 2 * n:3 * n] + 1j * ys[:, 3 * n:],
        method="Picard", delta_used=float(delta), contraction_factor=float(factor), lipschitz_CM=float(C_M),
        iterate_distances=tuple(dists), dense=dense,
        steps=[{"r_start": float(r_start), "delta": float(delta), "C_M": float(C_M), "factor": float(factor),
                "halvings": halvings, "sweeps": len(dists)}],
    )


def apply_integral_operator(model, charges, background, profile, r_values):
    """Evaluate K(u)(r) = u(r0) + int_{r0}^r J(s, u(s)) ds by adaptive quadrature.

    Independent of the panel rule used inside :func:`picard_solve`.
    """
    from scipy.integrate import quad_vec

    f = _rhs_real(model, charges, background)
    r0 = profile.r[0]
    u0 = profile.y_at(r0)
    out = []
    for r in np.atleast_1d(r_values):
        if r == r0:
            out.append(u0)
            continue
        val, _ = quad_vec(lambda s: f(s, profile.y_at(s)), r0, r, epsabs=1e-15, epsrel=1e-13)
        out.append(u0 + val)
    return np.array(out)


def picard_chain(model, charges, background, r_start, u_start, r_end, config=None, max_steps=10_000):
    """Cover [r_start, r_end] with consecutive certified Picard steps."""
    cfg = config or SolverConfig()
    state = u_start if isinstance(u_start, PhaseState) else PhaseState.from_real(np.asarray(u_start, float))
    r = r_start
    pieces = []
    while r < r_end - 1e-14 * max(1.0, abs(r_end)):
        step_cfg = SolverConfig(**{**cfg.__dict__, "max_delta": min(cfg.max_delta, r_end - r)})
        prof = picard_solve(model, charges, background, r, state, step_cfg)
        pieces.append(prof)
        r = prof.r[-1]
        state = PhaseState(prof.phi[-1], prof.pi[-1])
        if len(pieces) >= max_steps:
            raise MaxIters(f"picard_chain needed more than {max_steps} steps")
    rs = np.concatenate([pieces[0].r] + [p.r[1:] for p in pieces[1:]])
    phi = np.concatenate([pieces[0].phi] + [p.phi[1:] for p in pieces[1:]])
    pi = np.concatenate([pieces[0].pi] + [p.pi[1:] for p in pieces[1:]])
    bounds = np.array([p.r[0] for p in pieces] + [pieces[-1].r[-1]])

    def dense(x):
        k = int(np.clip(np.searchsorted(bounds, x, side="right") - 1, 0, len(pieces) - 1))
        return pieces[k].dense(x)

    return FlowProfile(
        r=rs, phi=phi, pi=pi, method="Picard", delta_used=float(rs[-1] - rs[0]),
        contraction_factor=max(p.contraction_factor for p in pieces),
        lipschitz_CM=max(p.lipschitz_CM for p in pieces),
        iterate_distances=tuple(d for p in pieces for d in p.iterate_distances),
        steps=[s for p in pieces for s in p.steps], dense=dense,
    )


# Runge-Kutta oracle -------------------------------------------------------

def rk_solve(model, charges, background, r_start, u_start, r_end, config=None, r_eval=None, samples=201):
    """Adaptive Dormand-Prince 5(4) integration with dense output."""
    cfg = config or SolverConfig()
    background.check(r_start)
    background.check(r_end)
    u0 = u_start.to_real() if isinstance(u_start, PhaseState) else np.asarray(u_start, float)
    if r_eval is None:
        r_eval = np.linspace(r_start, r_end, samples)
    sol = solve_ivp(_rhs_real(model, charges, background), (r_start, r_end), u0, method="RK45",
                    rtol=cfg.rk_rel_tol, atol=cfg.rk_abs_tol, dense_output=True, t_eval=np.asarray(r_eval))
    if sol.status != 0:
        raise StepUnderflow(f"RK integration stopped at r = {sol.t[-1] if len(sol.t) else r_start}: {sol.message}")
    n = model.n_c
    Y = sol.y.T
    return FlowProfile(
        r=sol.t, phi=Y[:, :n] + 1j * Y[:, n:2 * n], pi=Y[:, 2 * n:3 * n] + 1j * Y[:, 3 * n:],
        method="RK", delta_used=float(r_end - r_start), dense=sol.sol,
        steps=[{"nfev": int(sol.nfev), "accepted": len(sol.sol.ts) - 1}],
    )


def sup_distance(a, b, r_values=None):
    """Max-norm distance between two profiles on common radii (default: a's samples)."""
    r_values = a.r if r_values is None else r_values
    return max(float(np.max(np.abs(a.y_at(r) - b.y_at(r)))) for r in r_values)


# boundary data ------------------------------------------------------------

def near_horizon_seed(model, charges, phi_h, r0, background=None):
    """State at r0 from the logarithmic near-horizon profile.

    conj(phi) = conj(phi_h) - ell_inv ln(r0 - r_h) c,   c^j = g^{i jbar} d_i V_eff(phi_h)
    """
    phi_h = np.atleast_1d(np.asarray(phi_h, complex))
    bg = background or near_horizon_from_attractor(model, charges, phi_h)
    x = r0 - bg.r_h
    if x <= 0:
        raise OutOfDomain(f"seed radius {r0} is not outside r_h = {bg.r_h}")
    ell_inv = ell_inverse(bh_potential(model, phi_h, charges), scalar_potential(model, phi_h))
    c = np.linalg.solve(metric(model.kahler, phi_h), effective_potential_grad(model, phi_h, charges))
    shift = np.conj(c)
    return PhaseState(phi_h - ell_inv * math.log(x) * shift, -ell_inv * shift / x)


@dataclass(frozen=True)
class AsymptoticFit:
    phi0: np.ndarray
    sigma: np.ndarray
    fit_residual: float
    p_coef: np.ndarray | None = None
    q_coef: np.ndarray | None = None
    condition: float = 1.0
    extremal: bool | None = None

    def to_json(self):
        def cx(v):
            return None if v is None else {"re": [float(x) for x in np.real(v)], "im": [float(x) for x in np.imag(v)]}
        return {"phi0": cx(self.phi0), "sigma": cx(self.sigma), "p_coef": cx(self.p_coef),
                "q_coef": cx(self.q_coef), "fit_residual": self.fit_residual,
                "condition": self.condition, "extremal": self.extremal}


def asymptotic_match(profile, model, charges, background, include_pq=True, r_min=None, grad_tol=1e-8):
    """Least-squares fit of phi(r) ~ phi0 + Sigma/r + p P(r) + q Q(r) per component.

    Columns are normalised before the solve; the condition number of the
    normalised design matrix must stay below 1e10.
    """
    r = np.asarray(profile.r, float)
    phi = np.asarray(profile.phi, complex)
    if r_min is not None:
        keep = r >= r_min
        r, phi = r[keep], phi[keep]
    cols = [np.ones_like(r), 1.0 / r]
    if include_pq:
        if not isinstance(background, Asymptotic):
            raise TypeError("P/Q basis needs an Asymptotic background")
        P, Q = pq_profiles(background, r)
        cols += [P, Q]
    X = np.stack(cols, axis=1)
    if len(r) < X.shape[1]:
        raise IllConditionedFit("fewer samples than basis functions")
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0):
        raise IllConditionedFit("a basis column vanishes on the sample")
    Xs = X / scale
    cond = float(np.linalg.cond(Xs))
    if not np.isfinite(cond) or cond > 1e10:
        raise IllConditionedFit(f"design matrix condition number {cond:.3g} exceeds 1e10")
    coef, *_ = np.linalg.lstsq(Xs, phi, rcond=None)
    coef = coef / scale[:, None]
    resid = phi - X @ coef
    fit_residual = float(np.sqrt(np.mean(np.abs(resid) ** 2)))
    phi0 = coef[0]
    extremal = None
    try:
        extremal = bool(np.linalg.norm(bh_potential_grad(model, phi0, charges)) <= grad_tol
                        and np.linalg.norm(scalar_potential_grad(model, phi0)) <= grad_tol)
    except Exception:  # noqa: BLE001 - diagnostic only
        extremal = None
    return AsymptoticFit(
        phi0=phi0, sigma=coef[1], fit_residual=fit_residual,
        p_coef=coef[2] if include_pq else None, q_coef=coef[3] if include_pq else None,
        condition=cond, extremal=extremal,
    )
