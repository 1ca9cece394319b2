"""Kähler geometry of the scalar manifold for U(n_c)-symmetric potentials.

Both shipped families write K = Phi(s) with s = |phi|^2 and Phi a polynomial,
so every derivative is closed form:

    K_i       = Phi'(s) conj(phi_i)
    g_{i jbar} = Phi'(s) delta_ij + Phi''(s) conj(phi_i) phi_j
    Gamma^m_{jk} = g^{m ibar} d_k g_{j ibar}

New families only need to supply ``Phi`` coefficients; anything that is not
radial would have to override :meth:`KahlerModel.metric_derivative` as well.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from ._sampling import complex_ball
from .errors import NonPositiveDefinite

FAMILIES = ("flat", "radial_series")
DEFAULT_BOUNDS = (0.0, 1.0, 1.0, 0.0)


@dataclass(frozen=True)
class KahlerModel:
    """Radial Kähler potential ``K = sum_n radial_coeffs[n] |phi|^(2n)``.

    ``bound_constants`` are the growth constants ``(eps, C1, C2, C3)`` that
    :func:`certify_bounds` checks.
    """

    n_c: int
    family: str = "flat"
    radial_coeffs: tuple = (0.0, 1.0)
    bound_constants: tuple = DEFAULT_BOUNDS

    def __post_init__(self):
        if self.n_c < 1:
            raise ValueError("n_c must be positive")
        if self.family not in FAMILIES:
            raise ValueError(f"unknown Kähler family {self.family!r}; choose from {FAMILIES}")
        coeffs = (0.0, 1.0) if self.family == "flat" else tuple(float(c) for c in self.radial_coeffs)
        if len(coeffs) < 2 or coeffs[1] <= 0:
            raise ValueError("radial series needs a positive |phi|^2 coefficient")
        bounds = tuple(float(b) for b in self.bound_constants)
        if len(bounds) != 4 or min(bounds) < 0:
            raise ValueError("bound_constants must be four nonnegative reals (eps, C1, C2, C3)")
        object.__setattr__(self, "radial_coeffs", coeffs)
        object.__setattr__(self, "bound_constants", bounds)

    @classmethod
    def flat(cls, n_c, bound_constants=DEFAULT_BOUNDS):
        return cls(n_c, "flat", (0.0, 1.0), bound_constants)

    # radial profile and its s-derivatives
    def _phi_derivs(self, s):
        c = np.asarray(self.radial_coeffs)
        d1 = P.polyder(c)
        d2 = P.polyder(d1) if len(d1) > 1 else np.zeros(1)
        d3 = P.polyder(d2) if len(d2) > 1 else np.zeros(1)
        return (P.polyval(s, c), P.polyval(s, d1), P.polyval(s, d2), P.polyval(s, d3))

    def potential(self, phi):
        phi = np.asarray(phi, complex)
        return float(self._phi_derivs(float(np.vdot(phi, phi).real))[0])

    def potential_grad(self, phi):
        """Holomorphic gradient K_i."""
        phi = np.asarray(phi, complex)
        s = float(np.vdot(phi, phi).real)
        return self._phi_derivs(s)[1] * np.conj(phi)

    def potential_hessian_holo(self, phi):
        """K_ij = d_i d_j K (both holomorphic)."""
        phi = np.asarray(phi, complex)
        s = float(np.vdot(phi, phi).real)
        pb = np.conj(phi)
        return self._phi_derivs(s)[2] * np.outer(pb, pb)

    def metric_matrix(self, phi):
        phi = np.asarray(phi, complex)
        s = float(np.vdot(phi, phi).real)
        _, d1, d2, _ = self._phi_derivs(s)
        return d1 * np.eye(self.n_c) + d2 * np.outer(np.conj(phi), phi)

    def metric_derivative(self, phi):
        """``out[k, i, j] = d_k g_{i jbar}``."""
        phi = np.asarray(phi, complex)
        n = self.n_c
        s = float(np.vdot(phi, phi).real)
        _, _, d2, d3 = self._phi_derivs(s)
        pb = np.conj(phi)
        eye = np.eye(n)
        out = d2 * pb[:, None, None] * eye[None, :, :]
        out = out + d3 * np.einsum("k,i,j->kij", pb, pb, phi)
        out = out + d2 * np.einsum("i,jk->kij", pb, eye)
        return out


def _cholesky(g):
    try:
        return np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NonPositiveDefinite("Kähler metric is not positive definite at this point") from exc


def metric(model, phi):
    """Hermitian matrix ``g[i, j] = d_i d_jbar K``."""
    g = model.metric_matrix(phi)
    _cholesky(g)
    return g


def inverse_metric(model, phi):
    """Matrix inverse of :func:`metric` (so ``metric @ inverse_metric = 1``).

    The raised-index tensor g^{i jbar} is the transpose of this matrix.
    """
    g = model.metric_matrix(phi)
    L = _cholesky(g)
    Linv = np.linalg.inv(L)
    ginv = Linv.conj().T @ Linv
    return 0.5 * (ginv + ginv.conj().T)


def christoffel(model, phi):
    """Holomorphic Christoffel symbols ``Gamma[m, j, k]``, symmetric in (j, k).

    The antiholomorphic block is the elementwise complex conjugate.
    """
    ginv = inverse_metric(model, phi)
    dg = model.metric_derivative(phi)
    return np.einsum("im,kji->mjk", ginv, dg)


@dataclass(frozen=True)
class BoundCertificate:
    holds: bool
    worst_margin: float
    potential_margin: float
    christoffel_margin: float
    condition_margin: float
    radius: float
    samples: int
    gamma_norm: str = "max-component"


def certify_bounds(model, radius, samples, seed=0):
    """Sample the growth estimates for |K| and |Gamma| inside |phi| <= radius.

    Margins are ``bound - value`` minimized over the samples (the origin is
    always included). ``holds`` covers the two growth estimates; the
    separate ``condition_margin`` reports ``eps - |Phi'''(s)|``, which is the
    radial curvature condition written in the variable s.
    """
    if radius <= 0 or samples < 1:
        raise ValueError("radius must be positive and samples >= 1")
    eps, c1, c2, c3 = model.bound_constants
    pts = complex_ball(model.n_c, radius, samples, seed=seed)
    pts = np.vstack([np.zeros((1, model.n_c), complex), pts])
    k_margin = g_margin = c_margin = np.inf
    for phi in pts:
        rho = float(np.linalg.norm(phi))
        s = rho * rho
        k_bound = eps * rho**6 / 6 + c1 * rho**4 / 2 + c2 * rho**2 + c3
        g_bound = 2 * eps * rho**3 + c1 * rho
        k_margin = min(k_margin, k_bound - abs(model.potential(phi)))
        gam = christoffel(model, phi)
        g_margin = min(g_margin, g_bound - float(np.max(np.abs(gam))))
        c_margin = min(c_margin, eps - abs(model._phi_derivs(s)[3]))
    worst = min(k_margin, g_margin)
    return BoundCertificate(
        holds=bool(worst >= 0),
        worst_margin=float(worst),
        potential_margin=float(k_margin),
        christoffel_margin=float(g_margin),
        condition_margin=float(c_margin),
        radius=float(radius),
        samples=int(samples),
    )
