"""Run configuration: a sectioned key-value file (INI syntax).

Arrays are bracketed comma lists, ``[0.3, 0.1]``. Polynomial terms are
written ``coefficient@e1:e2:...`` with one exponent per scalar field, so
``f_1_1 = [1@0, 0.03j@1]`` is f_11 = 1 + 0.03 i phi. Gauge coupling keys are
``f_a_b`` with 1-based a <= b. See README.md for the full schema.
"""

from __future__ import annotations

import configparser
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .backgrounds import Asymptotic, load_table, near_horizon_from_attractor
from .errors import IoError, ParseError, ValidationError
from .flow import PhaseState, SolverConfig
from .kahler import DEFAULT_BOUNDS, KahlerModel
from .model import Charges, GaugeCouplings, ModelSpec, Polynomial

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"


@dataclass(frozen=True)
class BackgroundSpec:
    variant: str = "asymptotic"
    eta: float = 0.0
    vbh0: float = 0.0
    v0: float = 0.0
    r_lo: float = 1.0
    r_hi: float = math.inf
    phi_h: tuple = ()
    table: str = ""
    order: int = 3


@dataclass(frozen=True)
class FlowSetup:
    r_start: float = 1.0
    r_end: float = 10.0
    phi: tuple = ()
    pi: tuple = ()
    samples: int = 201
    picard_end: float | None = None


@dataclass(frozen=True)
class CriticalSetup:
    init: tuple = ()
    tol: float = 1e-10
    max_iters: int = 100


@dataclass(frozen=True)
class ScanSetup:
    q_values: tuple = ()
    g_values: tuple = ()
    index: int = 0
    workers: int = 1


@dataclass
class RunConfig:
    model: ModelSpec
    background: BackgroundSpec
    solver: SolverConfig
    flow: FlowSetup
    critical: CriticalSetup
    energy_L: float = 50.0
    match_r_min: float | None = None
    match_include_pq: bool = True
    scan: ScanSetup = ScanSetup()
    output_dir: str = "out"
    formats: tuple = ("json", "csv")
    seed: int = 0
    source: str = field(default="", compare=False)
    defaults_applied: tuple = field(default=(), compare=False)

    @property
    def charges(self):
        return self.model.charges

    def initial_state(self):
        n = self.model.n_c
        phi = self.flow.phi or (0j,) * n
        pi = self.flow.pi or (0j,) * n
        return PhaseState(np.array(phi), np.array(pi))

    def build_background(self, phi_h=None):
        bs = self.background
        if bs.variant == "asymptotic":
            return Asymptotic(bs.eta, bs.vbh0, bs.v0, (bs.r_lo, bs.r_hi))
        if bs.variant == "near_horizon":
            ph = np.array(phi_h if phi_h is not None else (bs.phi_h or (0j,) * self.model.n_c))
            return near_horizon_from_attractor(self.model, self.charges, ph)
        path = Path(bs.table)
        if not path.is_absolute() and self.source:
            path = Path(self.source).parent / path
        dom = None if not math.isfinite(bs.r_hi) else (bs.r_lo, bs.r_hi)
        return load_table(path, order=bs.order, domain=dom)


# value parsing ------------------------------------------------------------

def _list(raw, section, key):
    raw = raw.strip()
    if not (raw.startswith("[") and raw.endswith("]")):
        raise ParseError(f"expected a bracketed list, got {raw!r}", section, key)
    body = raw[1:-1].strip()
    return [p.strip() for p in body.split(",")] if body else []


def _float(raw, section, key):
    try:
        val = float(raw)
    except ValueError as exc:
        raise ParseError(f"not a real number: {raw!r}", section, key) from exc
    if math.isnan(val):
        raise ValidationError("NaN is not allowed", section, key)
    return val


def _finite(raw, section, key):
    val = _float(raw, section, key)
    if not math.isfinite(val):
        raise ValidationError("value must be finite", section, key)
    return val


def _int(raw, section, key):
    try:
        return int(raw)
    except ValueError as exc:
        raise ParseError(f"not an integer: {raw!r}", section, key) from exc


def _complex(raw, section, key):
    try:
        val = complex(raw.replace(" ", ""))
    except ValueError as exc:
        raise ParseError(f"not a complex number: {raw!r}", section, key) from exc
    if not (math.isfinite(val.real) and math.isfinite(val.imag)):
        raise ValidationError("value must be finite", section, key)
    return val


def _floats(raw, section, key):
    return tuple(_finite(x, section, key) for x in _list(raw, section, key))


def _poly(raw, n, section, key):
    terms = []
    for item in _list(raw, section, key):
        if "@" not in item:
            raise ParseError(f"polynomial term {item!r} lacks '@exponents'", section, key)
        coef, exps = item.split("@", 1)
        exps = [_int(e, section, key) for e in exps.split(":")]
        if len(exps) != n:
            raise ValidationError(f"term {item!r} has {len(exps)} exponents, n_c = {n}", section, key)
        if any(e < 0 for e in exps):
            raise ValidationError(f"negative exponent in {item!r}", section, key)
        terms.append((_complex(coef, section, key), tuple(exps)))
    return Polynomial(n, tuple(terms))


def _fmt_float(x):
    return repr(float(x))


def _fmt_complex(z):
    z = complex(z)
    return repr(z).strip("()")


def _fmt_poly(poly):
    return "[" + ", ".join(f"{_fmt_complex(c)}@{':'.join(str(e) for e in exps)}" for c, exps in poly.terms) + "]"


def _fmt_list(values, fmt=_fmt_float):
    return "[" + ", ".join(fmt(v) for v in values) + "]"


# parse -------------------------------------------------------------------

def resolve_config_path(path):
    """Return ``path`` if it exists, else the bundled fixture of that name."""
    p = Path(path)
    if p.exists():
        return p
    bundled = DATA_DIR / p.name
    if bundled.exists():
        return bundled
    raise IoError(f"config file not found: {path}")


def parse_config(path):
    path = resolve_config_path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def parse_config_text(text, source=""):
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        raise ParseError(str(exc)) from exc
    defaults = []

    def need(section):
        if not cp.has_section(section):
            raise ValidationError("missing section", section)
        return cp[section]

    def get(section, key, conv, default=None, record=False):
        if cp.has_section(section) and key in cp[section]:
            return conv(cp[section][key], section, key)
        if default is None:
            raise ValidationError("missing key", section, key)
        if record:
            defaults.append(f"{section}.{key}={default}")
        return default

    m = need("model")
    n_c = _int(m.get("n_c", ""), "model", "n_c") if "n_c" in m else None
    n_v = _int(m.get("n_v", ""), "model", "n_v") if "n_v" in m else None
    if n_c is None or n_c < 1:
        raise ValidationError("n_c must be a positive integer", "model", "n_c")
    if n_v is None or n_v < 1:
        raise ValidationError("n_v must be a positive integer", "model", "n_v")

    need("kahler")
    family = get("kahler", "family", lambda v, s, k: v.strip(), "flat")
    if family not in ("flat", "radial_series"):
        raise ValidationError(f"unknown family {family!r}", "kahler", "family")
    coeffs = get("kahler", "coeffs", _floats, (0.0, 1.0))
    bounds = tuple(
        get("kahler", key, _finite, dflt, record=True)
        for key, dflt in zip(("epsilon", "c1", "c2", "c3"), DEFAULT_BOUNDS)
    )
    if min(bounds) < 0:
        raise ValidationError("bound constants must be nonnegative", "kahler")
    try:
        kahler = KahlerModel(n_c, family, coeffs, bounds)
    except ValueError as exc:
        raise ValidationError(str(exc), "kahler") from exc

    need("superpotential")
    W = get("superpotential", "terms", lambda v, s, k: _poly(v, n_c, s, k), Polynomial(n_c, ()))

    gsec = need("gauge")
    entries = []
    for key, raw in gsec.items():
        parts = key.split("_")
        if len(parts) != 3 or parts[0] != "f":
            raise ParseError("gauge keys must look like f_a_b", "gauge", key)
        a, b = _int(parts[1], "gauge", key) - 1, _int(parts[2], "gauge", key) - 1
        if not (0 <= a < n_v and 0 <= b < n_v):
            raise ValidationError(f"index outside n_v = {n_v}", "gauge", key)
        entries.append(((a, b), _poly(raw, n_c, "gauge", key)))
    gauge = GaugeCouplings(n_v, n_c, tuple(entries))

    need("charges")
    g = get("charges", "g", _floats)
    q = get("charges", "q", _floats)
    if len(g) != n_v or len(q) != n_v:
        raise ValidationError(f"charges need {n_v} entries each, got g:{len(g)} q:{len(q)}", "charges")
    model = ModelSpec(kahler, W, gauge, Charges(g, q))

    bsec = cp["background"] if cp.has_section("background") else {}
    variant = bsec.get("variant", "asymptotic").strip()
    if variant not in ("asymptotic", "near_horizon", "tabulated"):
        raise ValidationError(f"unknown variant {variant!r}", "background", "variant")
    phi_h = ()
    if "phi_h_re" in bsec or "phi_h_im" in bsec:
        re_ = get("background", "phi_h_re", _floats, (0.0,) * n_c)
        im_ = get("background", "phi_h_im", _floats, (0.0,) * n_c)
        if len(re_) != n_c or len(im_) != n_c:
            raise ValidationError(f"phi_h needs {n_c} entries", "background", "phi_h_re")
        phi_h = tuple(complex(a, b) for a, b in zip(re_, im_))
    background = BackgroundSpec(
        variant=variant,
        eta=get("background", "eta", _finite, 0.0),
        vbh0=get("background", "vbh0", _finite, 0.0),
        v0=get("background", "v0", _finite, 0.0),
        r_lo=get("background", "r_lo", _finite, 1.0),
        r_hi=get("background", "r_hi", _float, math.inf),
        phi_h=phi_h,
        table=get("background", "table", lambda v, s, k: v.strip(), ""),
        order=get("background", "order", _int, 3),
    )
    if variant == "tabulated" and not background.table:
        raise ValidationError("tabulated background needs a table path", "background", "table")

    solver_kwargs = {}
    for f in fields(SolverConfig):
        conv = _int if f.type in ("int", int) else _finite
        if cp.has_section("solver") and f.name in cp["solver"]:
            solver_kwargs[f.name] = conv(cp["solver"][f.name], "solver", f.name)
    try:
        solver = SolverConfig(**solver_kwargs)
    except ValueError as exc:
        raise ValidationError(str(exc), "solver") from exc

    def cvec(prefix):
        if not cp.has_section("solver") or (f"{prefix}_re" not in cp["solver"] and f"{prefix}_im" not in cp["solver"]):
            return ()
        re_ = get("solver", f"{prefix}_re", _floats, (0.0,) * n_c)
        im_ = get("solver", f"{prefix}_im", _floats, (0.0,) * n_c)
        if len(re_) != n_c or len(im_) != n_c:
            raise ValidationError(f"{prefix} needs {n_c} entries", "solver", f"{prefix}_re")
        return tuple(complex(a, b) for a, b in zip(re_, im_))

    flow = FlowSetup(
        r_start=get("solver", "r_start", _finite, 1.0),
        r_end=get("solver", "r_end", _finite, 10.0),
        phi=cvec("phi"),
        pi=cvec("pi"),
        samples=get("solver", "samples", _int, 201),
        picard_end=get("solver", "picard_end", _finite, None) if cp.has_section("solver") and "picard_end" in cp["solver"] else None,
    )
    if flow.r_end <= flow.r_start:
        raise ValidationError("r_end must exceed r_start", "solver", "r_end")

    init = ()
    if cp.has_section("critical") and ("init_re" in cp["critical"] or "init_im" in cp["critical"]):
        re_ = get("critical", "init_re", _floats, (0.0,) * n_c)
        im_ = get("critical", "init_im", _floats, (0.0,) * n_c)
        if len(re_) != n_c or len(im_) != n_c:
            raise ValidationError(f"init needs {n_c} entries", "critical", "init_re")
        init = tuple(complex(a, b) for a, b in zip(re_, im_))
    critical = CriticalSetup(
        init=init,
        tol=get("critical", "tol", _finite, 1e-10),
        max_iters=get("critical", "max_iters", _int, 100),
    )

    scan = ScanSetup(
        q_values=get("scan", "q_values", _floats, ()),
        g_values=get("scan", "g_values", _floats, ()),
        index=get("scan", "index", _int, 0),
        workers=get("scan", "workers", _int, 1),
    )
    if not 0 <= scan.index < n_v:
        raise ValidationError("scan index outside n_v", "scan", "index")

    formats = get("output", "format", lambda v, s, k: tuple(x.strip() for x in v.split(",") if x.strip()), ("json", "csv"))
    cfg = RunConfig(
        model=model,
        background=background,
        solver=solver,
        flow=flow,
        critical=critical,
        energy_L=get("energy", "L", _finite, 50.0),
        match_r_min=get("match", "r_min", _finite, None) if cp.has_section("match") and "r_min" in cp["match"] else None,
        match_include_pq=get("match", "include_pq", lambda v, s, k: v.strip().lower() in ("1", "true", "yes"), True),
        scan=scan,
        output_dir=get("output", "dir", lambda v, s, k: v.strip(), "out"),
        formats=formats,
        seed=get("run", "seed", _int, 0),
        source=source,
        defaults_applied=tuple(defaults),
    )
    for item in defaults:
        log.info("default applied: %s", item)
    return cfg


def serialize_config(cfg):
    """INI text that :func:`parse_config_text` maps back to an equal RunConfig."""
    m = cfg.model
    eps, c1, c2, c3 = m.kahler.bound_constants
    lines = [
        "[model]", f"n_c = {m.n_c}", f"n_v = {m.n_v}", "",
        "[kahler]", f"family = {m.kahler.family}", f"coeffs = {_fmt_list(m.kahler.radial_coeffs)}",
        f"epsilon = {_fmt_float(eps)}", f"c1 = {_fmt_float(c1)}", f"c2 = {_fmt_float(c2)}", f"c3 = {_fmt_float(c3)}", "",
        "[superpotential]", f"terms = {_fmt_poly(m.superpotential)}", "",
        "[gauge]",
    ]
    for (a, b), poly in m.gauge.entries:
        lines.append(f"f_{a + 1}_{b + 1} = {_fmt_poly(poly)}")
    lines += ["", "[charges]", f"g = {_fmt_list(m.charges.g)}", f"q = {_fmt_list(m.charges.q)}", ""]
    b = cfg.background
    lines += ["[background]", f"variant = {b.variant}", f"eta = {_fmt_float(b.eta)}", f"vbh0 = {_fmt_float(b.vbh0)}",
              f"v0 = {_fmt_float(b.v0)}", f"r_lo = {_fmt_float(b.r_lo)}", f"r_hi = {_fmt_float(b.r_hi)}",
              f"order = {b.order}"]
    if b.phi_h:
        lines += [f"phi_h_re = {_fmt_list([z.real for z in b.phi_h])}", f"phi_h_im = {_fmt_list([z.imag for z in b.phi_h])}"]
    if b.table:
        lines.append(f"table = {b.table}")
    lines += ["", "[solver]"]
    for f in fields(SolverConfig):
        val = getattr(cfg.solver, f.name)
        lines.append(f"{f.name} = {val if isinstance(val, int) else _fmt_float(val)}")
    fl = cfg.flow
    lines += [f"r_start = {_fmt_float(fl.r_start)}", f"r_end = {_fmt_float(fl.r_end)}", f"samples = {fl.samples}"]
    if fl.picard_end is not None:
        lines.append(f"picard_end = {_fmt_float(fl.picard_end)}")
    for name, vec in (("phi", fl.phi), ("pi", fl.pi)):
        if vec:
            lines += [f"{name}_re = {_fmt_list([z.real for z in vec])}", f"{name}_im = {_fmt_list([z.imag for z in vec])}"]
    cr = cfg.critical
    lines += ["", "[critical]"]
    if cr.init:
        lines += [f"init_re = {_fmt_list([z.real for z in cr.init])}", f"init_im = {_fmt_list([z.imag for z in cr.init])}"]
    lines += [f"tol = {_fmt_float(cr.tol)}", f"max_iters = {cr.max_iters}", "",
              "[energy]", f"L = {_fmt_float(cfg.energy_L)}", "",
              "[match]", f"include_pq = {str(cfg.match_include_pq).lower()}"]
    if cfg.match_r_min is not None:
        lines.append(f"r_min = {_fmt_float(cfg.match_r_min)}")
    lines += ["",
              "[scan]", f"q_values = {_fmt_list(cfg.scan.q_values)}", f"g_values = {_fmt_list(cfg.scan.g_values)}",
              f"index = {cfg.scan.index}", f"workers = {cfg.scan.workers}", "",
              "[output]", f"dir = {cfg.output_dir}", f"format = {', '.join(cfg.formats)}", "",
              "[run]", f"seed = {cfg.seed}", ""]
    return "\n".join(lines)
