"""Deterministic low-discrepancy sampling in complex balls."""

import numpy as np
from scipy.special import ndtri
from scipy.stats import qmc


def halton(dim, n, seed=0):
    return qmc.Halton(d=dim, scramble=True, seed=seed).random(n)


def complex_ball(n_c, radius, samples, seed=0, center=None, norm="l2"):
    """Points of C^n_c with |z - center| <= radius, shape (samples, n_c).

    Direction comes from a Gaussian transform of Halton coordinates, radius
    from the last coordinate with the volume-uniform power law. With
    ``norm="max"`` the real components are drawn in the cube instead.
    """
    d = 2 * n_c
    if norm == "max":
        u = halton(d, samples, seed)
        x = radius * (2.0 * u - 1.0)
    else:
        u = halton(d + 1, samples, seed)
        g = ndtri(np.clip(u[:, :d], 1e-12, 1 - 1e-12))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        x = g * (radius * u[:, d:] ** (1.0 / d))
    z = x[:, :n_c] + 1j * x[:, n_c:]
    if center is not None:
        z = z + np.asarray(center, complex)[None, :]
    return z
