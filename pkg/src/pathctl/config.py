"""Experiment configuration files.

Grammar (INI style, ``#`` or ``;`` comments)::

    [experiment]
    subcommand = value            # optional; must match the command line
    seeds = 0, 1, 2
    method = shift                # shift | splitting | both
    workers = 1

    [problem]
    dim = 1
    nu = 0.25
    potential = zero              # catalog entry: identifier then key=value tokens
    terminal = quadratic kappa=1
    lagrangian = quadratic
    control_bound = auto          # or a positive number
    control_K = 20
    boundary_mode = linear

    [grid]
    t0 = 0
    T = 1
    N = 400
    lower = -4
    upper = 4
    M = 401

    [tolerances]                  # any of TOLERANCE_DEFAULTS
    value_rel = 0.02

One further section named after the subcommand (``[oracle]``, ``[dpp]``,
``[drift]``, ``[invariants]``, ``[comparison]``, ``[convergence]``,
``[hopf_cole]``) holds its settings; see ``SECTION_DEFAULTS``.
Vector parameters use commas without spaces, e.g. ``linear a=0.8,0.3``.
"""

from __future__ import annotations

import configparser
import hashlib
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigurationError, ProvenanceWarning
from .fields import SpaceGrid
from .problem import CatalogEntry, ProblemSpec, make_entry
from .randomness import TimeGrid

SUBCOMMANDS = ("value", "oracle-compare", "dpp", "drift", "invariants", "comparison", "convergence", "hopf-cole")

TOLERANCE_DEFAULTS = {
    "value_rel": 0.02,
    "value_linear": 5e-3,
    "zero_value": 1e-12,
    "drift_linear": 1e-3,
    "oracle_gap": 0.05,
    "oracle_modes": 1e-9,
    "dpp": 0.01,
    "momentum": 0.05,
    "terminal_factor": 2.0,
    "drift_spde": 0.05,
    "conserved_rel": 0.02,
    "symmetry": 1e-6,
    "comparison": 1e-10,
    "lipschitz_slack": 0.05,
    "slope_min": 0.8,
    "hopf_cole_zero": 1e-10,
    "hopf_cole_quadrature": 1e-6,
    "hopf_cole_ito": 0.01,
}

SECTION_DEFAULTS = {
    "oracle": {"x": "0.5", "t_index": "0", "K_ctrl": "40", "mode": "both", "max_enumeration": "100000000"},
    "dpp": {"points": "20", "steps": "1, 5", "core_fraction": "0.5"},
    "drift": {"x": "0.5", "scheme": "euler", "strict": "false"},
    "invariants": {"symmetry": "rotation", "x": "0", "guard": "0.1"},
    "comparison": {"S1": "", "S2": ""},
    "convergence": {"levels": "3", "reference": "closed-form"},
    "hopf_cole": {"f": "zero", "accumulation": "logsumexp"},
}

_SECTION_OF = {"oracle-compare": "oracle", "hopf-cole": "hopf_cole"}


class ConfigParseError(ConfigurationError):
    def __init__(self, source: str, line: int | None, message: str):
        where = f"{source}:{line}" if line else source
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    subcommand: str
    spec: ProblemSpec
    seeds: tuple
    methods: tuple
    workers: int
    settings: dict
    tolerances: dict
    config_hash: str
    source: str
    output_dir: str | None = None
    raw: dict = field(default_factory=dict)


def parse_entry(text: str) -> CatalogEntry:
    """``"cosine kappa=1 k=2"`` -> catalog entry."""
    tokens = text.split()
    if not tokens:
        raise ConfigurationError("empty catalog entry")
    params = {}
    for tok in tokens[1:]:
        if "=" not in tok:
            raise ConfigurationError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        try:
            vals = [float(p) for p in v.split(",")]
        except ValueError:
            raise ConfigurationError(f"parameter {k!r} needs numbers, got {v!r}") from None
        params[k] = vals[0] if len(vals) == 1 else vals
    return make_entry(tokens[0], **params)


def _line_index(text: str) -> dict:
    """``(section, key) -> line number`` for diagnostics."""
    out, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            out[(section, None)] = n
        elif section and "=" in s and not s.startswith(("#", ";")):
            out[(section, s.split("=", 1)[0].strip().lower())] = n
    return out


def load_config(path, subcommand: str | None = None) -> ExperimentConfig:
    path = Path(path)
    src = str(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ConfigParseError(src, None, f"cannot read config: {exc.strerror}") from None
    text = data.decode("utf-8")
    lines = _line_index(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=src)
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigParseError(src, line, exc.message.splitlines()[0] if hasattr(exc, "message") else str(exc)) from None

    def fail(section, key, msg):
        raise ConfigParseError(src, lines.get((section, key.lower() if key else None)) or lines.get((section, None)),
                               f"[{section}] {key + ': ' if key else ''}{msg}")

    def get(section, key, default=None, required=False):
        if cp.has_option(section, key):
            return cp.get(section, key).strip()
        if required:
            fail(section, None, f"missing required field {key!r}")
        return default

    def num(section, key, default=None, kind=float, required=False):
        raw = get(section, key, None, required)
        if raw is None:
            return default
        try:
            val = kind(float(raw)) if kind is int else kind(raw)
            if kind is int and float(raw) != int(float(raw)):
                raise ValueError
        except ValueError:
            fail(section, key, f"expected {'an integer' if kind is int else 'a number'}, got {raw!r}")
        return val

    known_sections = {"experiment", "problem", "grid", "tolerances"} | set(SECTION_DEFAULTS)
    for sec in cp.sections():
        if sec not in known_sections:
            fail(sec, None, f"unknown section; known: {', '.join(sorted(known_sections))}")

    sub = get("experiment", "subcommand") if cp.has_section("experiment") else None
    if subcommand and sub and sub != subcommand:
        fail("experiment", "subcommand", f"config is for {sub!r}, command line asked for {subcommand!r}")
    sub = subcommand or sub
    if sub not in SUBCOMMANDS:
        raise ConfigParseError(src, None, f"unknown subcommand {sub!r}; known: {', '.join(SUBCOMMANDS)}")

    seeds_raw = get("experiment", "seeds", "0") if cp.has_section("experiment") else "0"
    try:
        seeds = tuple(sorted({int(s) for s in seeds_raw.replace(",", " ").split()}))
    except ValueError:
        fail("experiment", "seeds", f"expected integers, got {seeds_raw!r}")
    if not seeds:
        fail("experiment", "seeds", "needs at least one seed")
    method = get("experiment", "method", "shift") if cp.has_section("experiment") else "shift"
    methods = {"shift": ("shift",), "splitting": ("splitting",), "both": ("shift", "splitting")}.get(method)
    if methods is None:
        fail("experiment", "method", f"expected shift, splitting or both, got {method!r}")
    workers = num("experiment", "workers", 1, int) if cp.has_section("experiment") else 1
    if workers < 1:
        fail("experiment", "workers", "must be at least 1")

    for sec in ("problem", "grid"):
        if not cp.has_section(sec):
            raise ConfigParseError(src, None, f"missing section [{sec}]")
    dim = num("problem", "dim", 1, int)
    nu = num("problem", "nu", required=True)
    t_args = (num("grid", "t0", 0.0), num("grid", "T", 1.0), num("grid", "N", kind=int, required=True))
    s_args = (num("grid", "lower", required=True), num("grid", "upper", required=True),
              num("grid", "M", kind=int, required=True))
    try:
        tg = TimeGrid(*t_args)
    except ConfigurationError as exc:
        fail("grid", None, str(exc))
    try:
        sg = SpaceGrid(dim, *s_args)
    except ConfigurationError as exc:
        fail("grid", None, str(exc))
    entries = {}
    for key in ("potential", "terminal"):
        try:
            entries[key] = parse_entry(get("problem", key, "zero"))
        except ConfigurationError as exc:
            fail("problem", key, str(exc))
    cb_raw = get("problem", "control_bound", "auto")
    if cb_raw == "auto":
        cb = None
    else:
        cb = num("problem", "control_bound")
    extra = (get("problem", "lagrangian", "quadratic"), num("problem", "control_K", 20, int),
             get("problem", "boundary_mode", "linear"))
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProvenanceWarning)
            spec = ProblemSpec(dim, nu, tg, sg, entries["potential"], entries["terminal"], cb, *extra)
    except ConfigurationError as exc:
        fail("problem", None, str(exc))

    tolerances = dict(TOLERANCE_DEFAULTS)
    if cp.has_section("tolerances"):
        for key in cp.options("tolerances"):
            if key not in TOLERANCE_DEFAULTS:
                fail("tolerances", key, f"unknown tolerance; known: {', '.join(sorted(TOLERANCE_DEFAULTS))}")
            val = num("tolerances", key)
            if not val > 0:
                fail("tolerances", key, "tolerances must be positive")
            tolerances[key] = val

    section = _SECTION_OF.get(sub, sub)
    settings = dict(SECTION_DEFAULTS.get(section, {}))
    if cp.has_section(section):
        for key in cp.options(section):
            if key not in settings:
                fail(section, key, f"unknown setting; known: {', '.join(sorted(settings))}")
            settings[key] = cp.get(section, key).strip()
    settings = _validate_settings(section, settings, dim, fail)
    raw = {s: dict(cp.items(s)) for s in cp.sections()}
    return ExperimentConfig(sub, spec, seeds, methods, workers, settings, tolerances,
                            hashlib.sha256(data).hexdigest(), src, None, raw)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(",", " ").split()]


def _validate_settings(section: str, s: dict, dim: int, fail) -> dict:
    out = dict(s)

    def point(key):
        try:
            vals = _floats(s[key])
        except ValueError:
            fail(section, key, f"expected numbers, got {s[key]!r}")
        if len(vals) == 1:
            vals = vals * dim
        if len(vals) != dim:
            fail(section, key, f"expected {dim} coordinates, got {len(vals)}")
        return tuple(vals)

    def integer(key, lo=None):
        try:
            v = int(s[key])
        except ValueError:
            fail(section, key, f"expected an integer, got {s[key]!r}")
        if lo is not None and v < lo:
            fail(section, key, f"must be at least {lo}")
        return v

    def real(key, positive=True):
        try:
            v = float(s[key])
        except ValueError:
            fail(section, key, f"expected a number, got {s[key]!r}")
        if positive and not v > 0:
            fail(section, key, "must be positive")
        return v

    def choice(key, options):
        if s[key] not in options:
            fail(section, key, f"expected one of {', '.join(options)}, got {s[key]!r}")
        return s[key]

    def entry(key):
        try:
            return parse_entry(s[key])
        except ConfigurationError as exc:
            fail(section, key, str(exc))

    if section == "oracle":
        out.update(x=point("x"), t_index=integer("t_index", 0), K_ctrl=integer("K_ctrl", 1),
                   mode=choice("mode", ("both", "auto", "enumerate", "lattice-dp")),
                   max_enumeration=int(real("max_enumeration")))
    elif section == "dpp":
        try:
            steps = tuple(int(v) for v in s["steps"].replace(",", " ").split())
        except ValueError:
            fail(section, "steps", f"expected integers, got {s['steps']!r}")
        if not steps or min(steps) < 1:
            fail(section, "steps", "step counts must be positive")
        out.update(points=integer("points", 1), steps=steps, core_fraction=real("core_fraction"))
    elif section == "drift":
        out.update(x=point("x"), scheme=choice("scheme", ("euler", "heun")),
                   strict=choice("strict", ("true", "false")) == "true")
    elif section == "invariants":
        out.update(symmetry=choice("symmetry", ("rotation", "time_translation")), x=point("x"),
                   guard=real("guard", positive=False))
        if out["symmetry"] == "rotation" and dim != 2:
            fail(section, "symmetry", "rotation needs dim = 2")
    elif section == "comparison":
        out.update(S1=entry("S1"), S2=entry("S2"))
    elif section == "convergence":
        out.update(levels=integer("levels", 3), reference=choice("reference", ("closed-form", "finest")))
    elif section == "hopf_cole":
        out.update(f=entry("f"), accumulation=choice("accumulation", ("logsumexp", "direct")))
        if dim != 1:
            fail("problem", "dim", "the heat-equation reference is one-dimensional")
    return out
