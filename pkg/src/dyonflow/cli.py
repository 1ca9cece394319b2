"""Command-line batch runner: ``dyonflow <command> --config <path> [options]``."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .backgrounds import Asymptotic, NearHorizon, near_horizon_from_attractor
from .config import parse_config, serialize_config
from .criticality import Which, find_critical
from .energy import energy, energy_bound_check
from .errors import (
    BallEscape, ComplexBranch, ConfigError, DyonflowError, HorizonSingularity, IllConditionedFit, MaxIters,
    NoContraction, NoConvergence, NonPositiveDefinite, NonPositiveLambda, OutOfDomain, ProfileGap, SingularH,
    StepUnderflow,
)
from .flow import (
    FlowProfile, apply_integral_operator, asymptotic_match, near_horizon_seed, picard_chain,
    picard_solve, rk_solve, sup_distance,
)
from .gauge import residual_gauge_eom
from .kahler import certify_bounds
from .model import Charges, ModelSpec
from .potentials import bh_potential, effective_potential_at, ell_inverse, lipschitz_estimate, scalar_potential

log = logging.getLogger("dyonflow")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_CONFIG = 3
EXIT_VERIFY = 4
EXIT_DIVERGENT = 5
EXIT_PICARD = 6
EXIT_RK = 7
EXIT_CRITICAL = 8
EXIT_FIT = 9
EXIT_DOMAIN = 10
EXIT_MODEL = 11
EXIT_NUMERIC = 12

EXIT_CODES_HELP = f"""exit codes:
  {EXIT_OK}   success
  {EXIT_INTERNAL}   unexpected internal error
  {EXIT_USAGE}   usage error (unknown command, bad flags)
  {EXIT_CONFIG}   config could not be read, parsed or validated
  {EXIT_VERIFY}   verify: at least one sub-check failed
  {EXIT_DIVERGENT}   energy: verdict Divergent
  {EXIT_PICARD}   Picard step not certified (no contraction, ball escape, max iterations)
  {EXIT_RK}   Runge-Kutta step size underflow
  {EXIT_CRITICAL}  critical point search did not converge
  {EXIT_FIT}   asymptotic fit ill-conditioned
  {EXIT_DOMAIN}  radius outside the background domain or profile gap
  {EXIT_MODEL}  model degenerate (metric not positive, singular gauge matrix, complex branch)
  {EXIT_NUMERIC}  other numerical failure

On failure, artifacts computed so far are written with a .partial suffix."""

_ERROR_CODES = (
    ((NoContraction, BallEscape, MaxIters), EXIT_PICARD),
    ((StepUnderflow,), EXIT_RK),
    ((NoConvergence,), EXIT_CRITICAL),
    ((IllConditionedFit,), EXIT_FIT),
    ((OutOfDomain, HorizonSingularity, NonPositiveLambda, ProfileGap), EXIT_DOMAIN),
    ((NonPositiveDefinite, SingularH, ComplexBranch), EXIT_MODEL),
    ((ConfigError,), EXIT_CONFIG),
    ((DyonflowError,), EXIT_NUMERIC),
)


def exit_code_for(exc):
    for types, code in _ERROR_CODES:
        if isinstance(exc, types):
            return code
    return EXIT_INTERNAL


# serialization -------------------------------------------------------------

def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return {"re": float(obj.real), "im": float(obj.imag)}
    if isinstance(obj, Which):
        return obj.value
    return obj


def _encode(obj, indent=0):
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, float):
        if math.isnan(obj):
            return '"nan"'
        if math.isinf(obj):
            return '"inf"' if obj > 0 else '"-inf"'
        return format(obj, ".17g")
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_encode(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    return json.dumps(obj)


def dumps(obj):
    """Deterministic JSON; floats carry 17 significant digits."""
    return _encode(_plain(obj)) + "\n"


def _cx(v):
    v = np.atleast_1d(np.asarray(v, complex))
    return {"re": [float(x) for x in v.real], "im": [float(x) for x in v.imag]}


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(float(x), ".17g") if isinstance(x, (float, np.floating, int)) and not isinstance(x, bool)
                    else x for x in row])
    return buf.getvalue()


class Artifacts:
    """Collects named outputs; flushes them normally or as ``.partial`` on failure."""

    def __init__(self, out_dir, formats=("json", "csv")):
        self.out_dir = Path(out_dir)
        self.formats = set(formats)
        self.items = {}

    def json(self, name, payload):
        if "json" in self.formats:
            self.items[name + ".json"] = dumps(payload)

    def csv(self, name, header, rows):
        if "csv" in self.formats:
            self.items[name + ".csv"] = _csv_text(header, rows)

    def flush(self, partial=False):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        written = []
        for name, text in self.items.items():
            path = self.out_dir / (name + (".partial" if partial else ""))
            path.write_text(text)
            written.append(path)
        return written


# shared helpers -----------------------------------------------------------

def _phi_init(cfg):
    return np.array(cfg.critical.init or (0j,) * cfg.model.n_c, complex)


def _horizon_point(cfg, phi_h=None):
    """phi_h from the background section, else the V_eff search from the critical init."""
    if phi_h is not None:
        return np.asarray(phi_h, complex)
    if cfg.background.phi_h:
        return np.array(cfg.background.phi_h, complex)
    cp = find_critical(cfg.model, cfg.charges, Which.EffectiveV, _phi_init(cfg), tol=cfg.critical.tol,
                       max_iters=cfg.critical.max_iters)
    return cp.phi_star


def _start(cfg, args, background):
    """(r_start, initial state) honoring --r0 and near-horizon seeding."""
    r0 = args.r0 if args.r0 is not None else None
    if isinstance(background, NearHorizon) and not cfg.flow.phi:
        if r0 is None:
            r0 = background.r_h * (1.0 + cfg.solver.horizon_offset)
        phi_h = _horizon_point(cfg)
        return r0, near_horizon_seed(cfg.model, cfg.charges, phi_h, r0, background)
    return (cfg.flow.r_start if r0 is None else r0), cfg.initial_state()


def _profile_payload(profile, cfg, extra=None):
    payload = {"method": profile.method, "n_c": cfg.model.n_c, "r_start": float(profile.r[0]),
               "r_end": float(profile.r[-1]), "delta_used": profile.delta_used,
               "contraction_factor": profile.contraction_factor, "lipschitz_CM": profile.lipschitz_CM,
               "iterate_distances": list(profile.iterate_distances), "steps": profile.steps}
    payload.update(extra or {})
    payload["samples"] = profile.to_json()["samples"]
    return payload


def _solve_rk(cfg, background, r_start, state, r_end):
    n = max(cfg.flow.samples, 2)
    return rk_solve(cfg.model, cfg.charges, background, r_start, state, r_end, cfg.solver, samples=n)


# commands -----------------------------------------------------------------

def cmd_critical(cfg, args, art):
    init = _phi_init(cfg)
    points = []
    art.json("critical", {"init": _cx(init), "points": points})
    failed = None
    for which in Which:
        try:
            cp = find_critical(cfg.model, cfg.charges, which, init, tol=cfg.critical.tol,
                               max_iters=cfg.critical.max_iters)
            points.append(cp.to_json())
        except NoConvergence as exc:
            points.append({"which": which.value, "error": str(exc)})
            failed = failed or exc
        art.json("critical", {"init": _cx(init), "points": points})
    if failed:
        raise failed
    return EXIT_OK


def cmd_seed_horizon(cfg, args, art):
    phi_h = _horizon_point(cfg)
    bg = near_horizon_from_attractor(cfg.model, cfg.charges, phi_h)
    v_bh = bh_potential(cfg.model, phi_h, cfg.charges)
    v = scalar_potential(cfg.model, phi_h)
    payload = {"phi_h": _cx(phi_h), "v_bh": v_bh, "v": v, "v_eff": effective_potential_at(cfg.model, phi_h, cfg.charges),
               "ell_inv": ell_inverse(v_bh, v), "r_h": bg.r_h, "v1": bg.v1, "v2": bg.v2}
    art.json("horizon_seed", payload)
    r0 = args.r0 if args.r0 is not None else bg.r_h * (1.0 + cfg.solver.horizon_offset)
    seed = near_horizon_seed(cfg.model, cfg.charges, phi_h, r0, bg)
    payload.update({"r0": r0, "phi": _cx(seed.phi), "pi": _cx(seed.pi)})
    art.json("horizon_seed", payload)
    return EXIT_OK


def cmd_solve(cfg, args, art):
    bg = cfg.build_background()
    r_start, state = _start(cfg, args, bg)
    if cfg.flow.picard_end is not None:
        pic = picard_chain(cfg.model, cfg.charges, bg, r_start, state, cfg.flow.picard_end, cfg.solver)
    else:
        pic = picard_solve(cfg.model, cfg.charges, bg, r_start, state, cfg.solver)
    art.json("profile_picard", _profile_payload(pic, cfg))
    art.csv("profile_picard", *pic.csv_rows())
    r_end = max(cfg.flow.r_end, pic.r[-1])
    rk = _solve_rk(cfg, bg, r_start, state, r_end)
    agreement = sup_distance(pic, rk)
    art.json("profile_rk", _profile_payload(rk, cfg))
    art.csv("profile_rk", *rk.csv_rows())
    art.json("solve_summary", {"r_start": r_start, "r_end": r_end, "picard_interval": list(pic.interval),
                               "contraction_factor": pic.contraction_factor, "picard_rk_sup_distance": agreement})
    return EXIT_OK


def _load_or_solve(cfg, args, bg, r_end):
    """Reuse ``profile_rk.json`` from a previous ``solve`` when it covers [r_start, r_end]."""
    r_start, state = _start(cfg, args, bg)
    path = Path(args.out) / "profile_rk.json"
    if path.exists():
        prof = FlowProfile.from_json(json.loads(path.read_text()))
        if abs(prof.r[0] - r_start) <= 1e-12 * max(1.0, abs(r_start)) and prof.r[-1] >= r_end:
            log.info("reusing %s", path)
            return prof
    return _solve_rk(cfg, bg, r_start, state, r_end)


def cmd_match(cfg, args, art):
    bg = cfg.build_background()
    prof = _load_or_solve(cfg, args, bg, cfg.flow.r_end)
    include_pq = cfg.match_include_pq and isinstance(bg, Asymptotic)
    fit = asymptotic_match(prof, cfg.model, cfg.charges, bg, include_pq=include_pq, r_min=cfg.match_r_min)
    art.json("fit", fit.to_json())
    return EXIT_OK


def cmd_energy(cfg, args, art):
    bg = cfg.build_background()
    L = args.L if args.L is not None else cfg.energy_L
    prof = _load_or_solve(cfg, args, bg, L)
    rep = energy(cfg.model, cfg.charges, bg, prof, L)
    payload = rep.to_json()
    payload["r0"] = rep.r0
    payload["tail_increments"] = list(rep.tail_increments)
    art.json("energy", payload)
    if rep.verdict == "Finite":
        payload["bound_check"] = energy_bound_check(rep, prof, cfg.model, cfg.charges, bg, L)
        art.json("energy", payload)
        return EXIT_OK
    return EXIT_DIVERGENT


def cmd_verify(cfg, args, art):
    checks = {}
    art.json("verify", {"passed": False, "checks": checks})

    def record(name, passed, **detail):
        checks[name] = {"passed": bool(passed), **detail}
        art.json("verify", {"passed": all(c["passed"] for c in checks.values()), "checks": checks})

    cert = certify_bounds(cfg.model.kahler, 2.0, 10_000, seed=cfg.seed)
    record("kahler_bounds", cert.holds, worst_margin=cert.worst_margin, radius=cert.radius, samples=cert.samples)

    bg = cfg.build_background()
    r_start, state = _start(cfg, args, bg)
    lip = lipschitz_estimate(cfg.model, cfg.charges, state.phi, cfg.solver.ball_radius, cfg.solver.lipschitz_samples,
                             safety=cfg.solver.safety, seed=cfg.seed)
    record("lipschitz", math.isfinite(lip.C4) and math.isfinite(lip.C5), C4=lip.C4, C5=lip.C5,
           observed_C4=lip.observed_C4, observed_C5=lip.observed_C5)

    rs = r_start + np.linspace(0.0, 1.0, 9)
    ths = np.linspace(0.3, 2.8, 9)
    res = residual_gauge_eom(cfg.model, state.phi, cfg.charges, bg, (rs, ths))
    record("gauge_residual", res <= 1e-10, residual=res, tolerance=1e-10)

    try:
        pic = picard_solve(cfg.model, cfg.charges, bg, r_start, state, cfg.solver)
    except (NoContraction, BallEscape, MaxIters) as exc:
        record("picard_certificate", False, error=str(exc))
        return EXIT_VERIFY
    dists = np.array(pic.iterate_distances)
    ratios = dists[1:] / dists[:-1] if len(dists) > 1 else np.array([])
    tail = ratios[dists[1:] > 1e3 * cfg.solver.fixpoint_tol] if len(ratios) else ratios
    geometric = bool(np.all(tail <= pic.contraction_factor))
    record("picard_certificate", pic.contraction_factor < 1 and geometric, contraction_factor=pic.contraction_factor,
           delta=pic.delta_used, lipschitz_CM=pic.lipschitz_CM,
           max_ratio=float(np.max(tail)) if len(tail) else 0.0)

    r_end = pic.r[-1]
    rk = rk_solve(cfg.model, cfg.charges, bg, r_start, state, r_end, cfg.solver, r_eval=pic.r)
    tol = max(1e-8, 10 * cfg.solver.fixpoint_tol)
    dist = sup_distance(pic, rk)
    record("picard_rk_agreement", dist <= tol, sup_distance=dist, tolerance=tol)

    probe = pic.r[:: max(1, len(pic.r) // 6)]
    fixed = float(np.max(np.abs(apply_integral_operator(cfg.model, cfg.charges, bg, pic, probe)
                                - np.array([pic.y_at(r) for r in probe]))))
    record("fixed_point_residual", fixed <= tol, residual=fixed, tolerance=tol)

    return EXIT_OK if all(c["passed"] for c in checks.values()) else EXIT_VERIFY


def _scan_point(config_text, index, q_val, g_val):
    """One scan row; runs in a worker process."""
    from .config import parse_config_text

    cfg = parse_config_text(config_text)
    g = list(cfg.charges.g)
    q = list(cfg.charges.q)
    g[index], q[index] = g_val, q_val
    charges = Charges(tuple(g), tuple(q))
    model = ModelSpec(cfg.model.kahler, cfg.model.superpotential, cfg.model.gauge, charges)
    row = {"q": q_val, "g": g_val}
    try:
        cp = find_critical(model, charges, Which.EffectiveV, _phi_init(cfg), tol=cfg.critical.tol,
                           max_iters=cfg.critical.max_iters)
        phi_h = cp.phi_star
        v_bh = bh_potential(model, phi_h, charges)
        v = scalar_potential(model, phi_h)
        v_eff = effective_potential_at(model, phi_h, charges)
        row.update({"status": "ok", "phi_h": _cx(phi_h), "v_bh": v_bh, "v": v, "v_eff": v_eff,
                    "r_h": math.sqrt(abs(v_eff)), "ell_inv": ell_inverse(v_bh, v),
                    "signature": list(cp.hessian_signature)})
    except DyonflowError as exc:
        row.update({"status": type(exc).__name__, "error": str(exc)})
    return row


def cmd_scan(cfg, args, art):
    qs = cfg.scan.q_values or (cfg.charges.q[cfg.scan.index],)
    gs = cfg.scan.g_values or (cfg.charges.g[cfg.scan.index],)
    grid = [(q, g) for q in qs for g in gs]
    text = serialize_config(cfg)
    workers = max(1, cfg.scan.workers)
    if workers == 1:
        rows = [_scan_point(text, cfg.scan.index, q, g) for q, g in grid]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_scan_point, [text] * len(grid), [cfg.scan.index] * len(grid),
                                 [q for q, _ in grid], [g for _, g in grid]))
    art.json("scan", {"index": cfg.scan.index, "rows": rows})
    header = ["q", "g", "status", "v_bh", "v", "v_eff", "r_h", "ell_inv"]
    art.csv("scan", header, [[r.get(k, "") if k == "status" else r.get(k, float("nan")) for k in header] for r in rows])
    failed = [r for r in rows if r["status"] != "ok"]
    if failed:
        raise NoConvergence(f"{len(failed)} of {len(rows)} scan points failed")
    return EXIT_OK


COMMANDS = {
    "critical": cmd_critical,
    "seed-horizon": cmd_seed_horizon,
    "solve": cmd_solve,
    "match": cmd_match,
    "energy": cmd_energy,
    "verify": cmd_verify,
    "scan": cmd_scan,
}


def build_parser():
    p = argparse.ArgumentParser(
        prog="dyonflow",
        description="Dyonic black hole scalar flows: critical points, certified radial solves, energy audits.",
        epilog=EXIT_CODES_HELP,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("command", choices=sorted(COMMANDS), help="what to run")
    p.add_argument("--config", required=True, help="config file (bundled fixture names are accepted)")
    p.add_argument("--out", default=None, help="artifact directory (default: [output] dir)")
    p.add_argument("--L", type=float, default=None, help="energy cutoff radius")
    p.add_argument("--r0", type=float, default=None, help="start radius override")
    p.add_argument("--seed", type=int, default=None, help="random seed for sampling estimates")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"dyonflow: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.solver = dataclasses.replace(cfg.solver, seed=args.seed)
    for item in cfg.defaults_applied:
        print(f"dyonflow: default applied: {item}", file=sys.stderr)
    args.out = args.out or cfg.output_dir
    art = Artifacts(args.out, cfg.formats)
    t0 = time.perf_counter()
    try:
        code = COMMANDS[args.command](cfg, args, art)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit code, partials kept
        code = exit_code_for(exc)
        art.flush(partial=True)
        print(f"dyonflow {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        if code == EXIT_INTERNAL:
            raise
        return code
    art.flush(partial=False)
    log.info("%s finished in %.2f s with exit %d", args.command, time.perf_counter() - t0, code)
    return code


if __name__ == "__main__":
    sys.exit(main())
