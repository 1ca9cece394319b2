import numpy as np
import pytest

from dyonflow.backgrounds import Asymptotic
from dyonflow.flow import PhaseState
from dyonflow.kahler import KahlerModel
from dyonflow.model import Charges, GaugeCouplings, ModelSpec, Polynomial

FD_STEP = 1e-5


def flat_model(w0=0.1, f=1.0, charges=(0.0, 1.0), n_c=1):
    return ModelSpec(
        KahlerModel.flat(n_c),
        Polynomial.constant(n_c, w0) if w0 else Polynomial(n_c, ()),
        GaugeCouplings.constant([[f]], n_c),
        Charges((charges[0],), (charges[1],)),
    )


def curved_model():
    """n_c = 2, curved radial metric, polynomial W, field-dependent f, dyonic charges."""
    n = 2
    W = Polynomial(n, ((0.1, (0, 0)), (0.05 + 0.02j, (1, 0)), (-0.03j, (1, 1)), (0.02, (0, 2))))
    f = GaugeCouplings(1, n, (((0, 0), Polynomial(n, ((1.0, (0, 0)), (0.2j, (1, 0)), (0.1, (0, 1)), (0.05, (2, 0))))),))
    return ModelSpec(KahlerModel(n, "radial_series", (0.0, 1.0, 0.1, 0.02)), W, f, Charges((0.3,), (1.0,)))


def attractor_model():
    """V, V_BH and V_eff all critical at phi = 0; V_BH has a second critical point near phi = 1."""
    f = GaugeCouplings(1, 1, (((0, 0), Polynomial(1, ((2.0, (0,)), (1.0, (2,)), (-2.0 / 3.0, (3,))))),))
    return ModelSpec(KahlerModel.flat(1), Polynomial.constant(1, 0.05), f, Charges((0.0,), (1.0,)))


def minkowski(r_lo=1.0):
    return Asymptotic(0.0, 0.0, 0.0, (r_lo, np.inf))


def wirtinger_fd(fun, phi, h=FD_STEP):
    """Central-difference holomorphic gradient d_i = (d_x - i d_y) / 2 of a real function."""
    phi = np.asarray(phi, complex)
    out = np.zeros(len(phi), complex)
    for i in range(len(phi)):
        e = np.zeros(len(phi), complex)
        e[i] = h
        dx = (fun(phi + e) - fun(phi - e)) / (2 * h)
        dy = (fun(phi + 1j * e) - fun(phi - 1j * e)) / (2 * h)
        out[i] = 0.5 * (dx - 1j * dy)
    return out


def rel_err(a, b):
    a, b = np.asarray(a), np.asarray(b)
    scale = max(np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


def random_points(n_c, count, radius, seed):
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(count, n_c)) + 1j * rng.normal(size=(count, n_c))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * radius * rng.uniform(0.05, 1.0, size=(count, 1))


@pytest.fixture
def flat():
    return flat_model()


@pytest.fixture
def curved():
    return curved_model()


@pytest.fixture
def attractor():
    return attractor_model()


@pytest.fixture
def flat_start():
    return PhaseState(np.array([0.3 + 0.1j]), np.array([0.05 - 0.02j]))
