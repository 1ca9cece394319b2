"""Acceptance criteria 1-11, each at its stated tolerance.

Every test prints one line ``criterion N: PASS|FAIL <details>`` straight to
the terminal (also under ``pytest -q``) before asserting.
"""

import math
import shutil
import subprocess
import sys
import time

import numpy as np
import pytest
from scipy.integrate import simpson

from dyonflow.backgrounds import Asymptotic, near_horizon_from_attractor
from dyonflow.config import DATA_DIR, parse_config
from dyonflow.criticality import Which, check_frozen_pair, find_critical
from dyonflow.energy import energy, energy_bound_check, energy_density
from dyonflow.flow import (
    FlowProfile, PhaseState, asymptotic_match, contraction_delta, near_horizon_seed, picard_solve, rk_solve,
    sup_distance,
)
from dyonflow.gauge import FieldStrengthSample, field_strengths, residual_gauge_eom
from dyonflow.kahler import KahlerModel, certify_bounds
from dyonflow.model import Charges
from dyonflow.potentials import (
    bh_potential, bh_potential_grad, effective_potential, effective_potential_at, effective_potential_grad,
    ell_inverse, scalar_potential, scalar_potential_grad,
)

from conftest import attractor_model, curved_model, flat_model, minkowski, random_points, rel_err, wirtinger_fd


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
        assert ok, f"criterion {n}: {detail}"
    return emit


FLAT_START = PhaseState(np.array([0.3 + 0.1j]), np.array([0.05 - 0.02j]))


def test_criterion_01_picard_rk_agreement(report):
    m = flat_model(w0=0.1, f=1.0, charges=(0.0, 1.0))
    bg = minkowski()
    t0 = time.perf_counter()
    pic = picard_solve(m, m.charges, bg, 1.0, FLAT_START)
    rk = rk_solve(m, m.charges, bg, 1.0, FLAT_START, pic.r[-1], r_eval=pic.r)
    elapsed = time.perf_counter() - t0
    probe = np.linspace(pic.r[0], pic.r[-1], 101)
    dist = max(sup_distance(pic, rk), sup_distance(pic, rk, probe))
    report(1, dist <= 1e-8 and elapsed < 5.0,
           f"sup|picard - rk| = {dist:.2e} (<= 1e-8) on [{pic.r[0]:g}, {pic.r[-1]:.4g}], runtime {elapsed:.2f} s (< 5 s)")


def _picard_fixtures():
    out = []
    cfg = parse_config("flat_quadratic.cfg")
    out.append(("flat_quadratic", cfg.model, cfg.build_background(), cfg.flow.r_start, cfg.initial_state()))
    cfg = parse_config("radial_series.cfg")
    out.append(("radial_series", cfg.model, cfg.build_background(), cfg.flow.r_start, cfg.initial_state()))
    for name in ("horizon_seed.cfg", "attractor.cfg"):
        cfg = parse_config(name)
        bg = cfg.build_background()
        r0 = bg.r_h * (1 + cfg.solver.horizon_offset)
        phi_h = np.array(cfg.background.phi_h)
        out.append((name[:-4], cfg.model, bg, r0, near_horizon_seed(cfg.model, cfg.charges, phi_h, r0, bg)))
    m = curved_model()
    out.append(("curved_dyonic", m, minkowski(), 1.0,
                PhaseState(np.array([0.1 - 0.05j, 0.1j]), np.array([0.02j, -0.03]))))
    return out


def test_criterion_02_contraction_certificate(report):
    delta = contraction_delta(2.0, 1.0, 3.0)
    lines = []
    ok = delta == 1 / 5
    for name, m, bg, r0, u0 in _picard_fixtures():
        prof = picard_solve(m, m.charges, bg, r0, u0)
        d = np.array(prof.iterate_distances)
        # ratios are only meaningful above the round-off floor of the state
        floor = 1e-14 * max(1.0, np.max(np.abs(u0.to_real())))
        mask = d[1:] > floor
        ratio = float(np.max(d[1:][mask] / d[:-1][mask])) if mask.any() else 0.0
        fixture_ok = prof.contraction_factor < 1 and ratio <= prof.contraction_factor
        ok = ok and fixture_ok
        lines.append(f"{name}: C_M*delta={prof.contraction_factor:.3f} max ratio={ratio:.3f}")
    report(2, ok, f"delta(2,1,3) = {delta!r}; " + "; ".join(lines))


def _gradient_fixtures():
    models = [("flat_linear_f", flat_model(), 1), ("curved_dyonic", curved_model(), 2),
              ("attractor", attractor_model(), 1)]
    for name in sorted(p.name for p in DATA_DIR.glob("*.cfg")):
        cfg = parse_config(name)
        models.append((name[:-4], cfg.model, cfg.model.n_c))
    # a flat model with field-dependent f and nonzero W so every gradient is nontrivial
    from dyonflow.model import GaugeCouplings, ModelSpec, Polynomial
    f = GaugeCouplings(1, 1, (((0, 0), Polynomial(1, ((1.0, (0,)), (1j, (1,))))),))
    models.append(("flat_1_plus_i_phi", ModelSpec(KahlerModel.flat(1), Polynomial.constant(1, 0.1), f,
                                                  Charges((0.2,), (1.0,))), 1))
    return models


def test_criterion_03_gradient_suite(report):
    worst = {}
    for name, m, n_c in _gradient_fixtures():
        w = 0.0
        for phi in random_points(n_c, 100, 0.45, seed=11):
            for analytic, fun in (
                (scalar_potential_grad(m, phi), lambda z: scalar_potential(m, z)),
                (bh_potential_grad(m, phi, m.charges), lambda z: bh_potential(m, z, m.charges)),
                (effective_potential_grad(m, phi, m.charges), lambda z: effective_potential_at(m, z, m.charges)),
            ):
                w = max(w, rel_err(analytic, wirtinger_fd(fun, phi, h=1e-5)))
        worst[name] = w
    ok = all(v <= 1e-6 for v in worst.values())
    report(3, ok, "max relative error over 100 points: " + ", ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_criterion_04_effective_small_v(report):
    v_bh = np.linspace(-2.0, 2.0, 2001)
    worst = 0.0
    for vb in v_bh:
        if vb == 0:
            continue
        for t in np.linspace(-1.0, 1.0, 21):
            v = t * 1e-4 / (4 * abs(vb))
            excess = abs(effective_potential(vb, v) - vb) - 2 * vb * vb * abs(v)
            worst = max(worst, excess)
    exact = effective_potential(1.0, 3.0 / 16.0)
    ok = worst <= 0 and abs(exact - 4 / 3) <= 1e-12
    report(4, ok, f"max(|V_eff - v_bh| - 2 v_bh^2 |v|) = {worst:.2e} (<= 0); V_eff(1, 3/16) - 4/3 = {exact - 4 / 3:.1e}")


def test_criterion_05_near_horizon_log_law(report):
    cfg = parse_config("horizon_seed.cfg")
    m, charges = cfg.model, cfg.charges
    phi_h = np.array(cfg.background.phi_h)
    bg = near_horizon_from_attractor(m, charges, phi_h)
    c = np.linalg.solve(np.eye(1), effective_potential_grad(m, phi_h, charges))
    assert np.linalg.norm(c) > 1e-3  # phi_h is not critical
    ell = ell_inverse(bh_potential(m, phi_h, charges), scalar_potential(m, phi_h))
    x_lo, x_hi = 1e-4 * bg.r_h, 1e-3 * bg.r_h
    seed = near_horizon_seed(m, charges, phi_h, bg.r_h + x_lo, bg)
    xs = np.geomspace(x_lo, x_hi, 60)
    prof = rk_solve(m, charges, bg, bg.r_h + x_lo, seed, bg.r_h + x_hi, r_eval=bg.r_h + xs)
    slope = np.polyfit(np.log(prof.r - bg.r_h), prof.phi[:, 0].real, 1)[0] + 1j * np.polyfit(
        np.log(prof.r - bg.r_h), prof.phi[:, 0].imag, 1)[0]
    expected = -ell * np.conj(c[0])
    err = abs(slope - expected) / abs(expected)
    report(5, err <= 0.01, f"slope {slope:.6g} vs -ell_inv g^-1 dV_eff = {expected:.6g}, relative error {err:.2e} (<= 1e-2)")


def test_criterion_06_attractor_regularity(report):
    cfg = parse_config("attractor.cfg")
    m, charges = cfg.model, cfg.charges
    cp = find_critical(m, charges, Which.EffectiveV, np.array(cfg.critical.init))
    phi_h = cp.phi_star
    bg = near_horizon_from_attractor(m, charges, phi_h)
    r0 = bg.r_h * (1 + cfg.solver.horizon_offset)
    seed = near_horizon_seed(m, charges, phi_h, r0, bg)
    pic = picard_solve(m, charges, bg, r0, seed)
    rk = rk_solve(m, charges, bg, r0, seed, pic.r[-1], r_eval=pic.r)
    dev = max(float(np.max(np.abs(pic.phi - phi_h))), float(np.max(np.abs(rk.phi - phi_h))))
    # beyond the certified step as well
    far = rk_solve(m, charges, bg, r0, seed, 3 * bg.r_h)
    dev_far = float(np.max(np.abs(far.phi - phi_h)))
    ok = dev <= 1e-8 and dev_far <= 1e-8 and pic.contraction_factor < 1
    report(6, ok, f"phi_h = {abs(phi_h[0]):.1e}, max |phi(r) - phi_h| = {dev:.2e} (<= 1e-8) on the certified "
                  f"interval (delta {pic.delta_used:.2e}, C_M*delta {pic.contraction_factor:.2f}), "
                  f"{dev_far:.2e} out to 3 r_h")


def test_criterion_07_asymptotic_fit(report):
    rng = np.random.default_rng(7)
    noise = 1e-8
    r = np.linspace(1.0, 50.0, 400)
    m = attractor_model()
    # phi0 = 0 is critical for both V and V_BH here, so the P/Q terms must vanish
    assert check_frozen_pair(m, m.charges, np.array([0j]), np.array([0j]), 1e-10).asymptotic_ok
    sigma = np.array([0.35 - 0.2j])
    phi0 = np.array([0j])
    phi = phi0[None, :] + sigma[None, :] / r[:, None]
    phi = phi + noise * (rng.standard_normal(phi.shape) + 1j * rng.standard_normal(phi.shape))
    prof = FlowProfile(r, phi, -sigma[None, :] / r[:, None] ** 2, "RK", 49.0)
    plain = asymptotic_match(prof, m, m.charges, minkowski(), include_pq=False)
    sig_err = float(np.max(np.abs(plain.sigma - sigma) / np.abs(sigma)))
    full = asymptotic_match(prof, m, m.charges, minkowski(), include_pq=True)
    pq = max(float(np.max(np.abs(full.p_coef))), float(np.max(np.abs(full.q_coef))))
    ok = sig_err <= 1e-4 and pq <= 10 * noise and full.extremal
    report(7, ok, f"Sigma relative error {sig_err:.2e} (<= 1e-4); |p|, |q| <= {pq:.2e} (<= {10 * noise:.0e}), "
                  f"extremal={full.extremal}")


def test_criterion_08_energy_dichotomy(report):
    zero = Charges((0.0,), (0.0,))
    # V0 = 0: W = 0, electric charge, decaying scalar profile
    m = flat_model(w0=0)
    start = PhaseState(np.array([0.2 + 0.1j]), np.array([0.3 - 0.1j]))
    L = 30.0
    prof = rk_solve(m, m.charges, minkowski(), 1.0, start, L, samples=301)
    rep = energy(m, m.charges, minkowski(), prof, L)
    grid = np.linspace(1.0, L, 8001)
    ref = simpson([energy_density(m, m.charges, minkowski(), x, prof.state_at(x)) for x in grid], x=grid)
    rel = abs(rep.finite_part - ref) / abs(ref)
    bound_ok = energy_bound_check(rep, prof, m, m.charges, minkowski(), L)
    # frozen run with a curved lapse: also Finite and bounded
    bg2 = Asymptotic(0.0, 0.3, 0.0, (1.0, math.inf))
    m2 = flat_model(w0=0, f=2.0)
    frozen = rk_solve(m2, m2.charges, bg2, 1.0, PhaseState(np.array([0.1j]), np.array([0j])), 20.0, samples=41)
    rep2 = energy(m2, m2.charges, bg2, frozen, 20.0)
    bound_ok = bound_ok and rep2.verdict == "Finite" and energy_bound_check(rep2, frozen, m2, m2.charges, bg2, 20.0)
    # V0 = -0.1
    m3 = flat_model(w0=math.sqrt(1 / 30))
    bg3 = Asymptotic(0.0, 0.0, -0.1, (1.0, math.inf))
    prof3 = rk_solve(m3, zero, bg3, 1.0, PhaseState(np.array([0j]), np.array([0j])), 10.0, samples=11)
    rep3 = energy(m3, zero, bg3, prof3, 10.0)
    ok = rep.verdict == "Finite" and rel <= 1e-6 and rep3.verdict == "Divergent" and bound_ok
    report(8, ok, f"V0=0: {rep.verdict}, finite part vs fine grid rel {rel:.1e} (<= 1e-6); "
                  f"V0={rep3.v0_at_infinity:.3g}: {rep3.verdict}; bound checks pass: {bound_ok}")


def test_criterion_09_gauge_residuals(report):
    grid = (np.linspace(1.5, 3.5, 11), np.linspace(0.3, 2.8, 11))
    worst = 0.0
    for m, bg in ((curved_model(), Asymptotic(0.4, 0.3, -0.2, (1.0, math.inf))), (flat_model(), minkowski()),
                  (attractor_model(), near_horizon_from_attractor(attractor_model(), attractor_model().charges,
                                                                  np.array([0j])))):
        phi = np.full(m.n_c, 0.15 + 0.05j)
        worst = max(worst, residual_gauge_eom(m, phi, m.charges, bg, grid))
    m = curved_model()
    phi = np.array([0.2 + 0.1j, 0.1j])

    def wrong(r, theta):
        s = field_strengths(m, phi, m.charges, minkowski(), r, theta)
        return FieldStrengthSample(r, theta, 1.1 * s.F01, s.F23)

    detected = residual_gauge_eom(m, phi, m.charges, minkowski(), grid, fields=wrong)
    report(9, worst <= 1e-10 and detected >= 1e-3,
           f"frozen residual {worst:.1e} (<= 1e-10); 10% perturbation residual {detected:.2e} (>= 1e-3)")


def test_criterion_10_kahler_certification(report):
    lines = []
    ok = True
    for name in sorted(p.name for p in DATA_DIR.glob("*.cfg")):
        k = parse_config(name).model.kahler
        cert = certify_bounds(k, 2.0, 10_000)
        ok = ok and cert.holds
        lines.append(f"{name[:-4]} margin {cert.worst_margin:.3g}")
    neg = certify_bounds(KahlerModel.flat(1, (0.0, 0.0, 0.0, 0.0)), 2.0, 10_000)
    ok = ok and not neg.holds
    report(10, ok, "; ".join(lines) + f"; zero-constant control holds={neg.holds}")


def test_criterion_11_end_to_end_verify(report, tmp_path):
    exe = shutil.which("dyonflow")
    cmd = [exe] if exe else [sys.executable, "-m", "dyonflow.cli"]
    t0 = time.perf_counter()
    proc = subprocess.run(cmd + ["verify", "--config", "flat_quadratic.cfg", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    report(11, proc.returncode == 0 and elapsed < 60,
           f"`dyonflow verify --config flat_quadratic.cfg` exit {proc.returncode} in {elapsed:.1f} s (< 60 s)")
