"""Command-line experiment runner.

    pathctl <subcommand> --config FILE [--out DIR] [--workers N]

Exit status: 0 when every enabled criterion passes, 1 when one fails,
2 for unusable configuration.  The output directory defaults to
``$PATHCTL_OUTPUT_DIR`` or ``./pathctl-out``.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .analysis import comparison_check, continuity_moduli, convergence_study, cross_method_gaps
from .closed_form import closed_form_for
from .config import SUBCOMMANDS, ExperimentConfig, load_config
from .drift_dynamics import (drift_spde_residual, dump_trajectory_csv, extract_drift, momentum_terms,
                             simulate_optimal)
from .errors import ConfigurationError, PreconditionError, ProvenanceWarning
from .fields import ScalarField, dump_field_csv, interpolate
from .invariants import SymmetryField, conserved_quantity, symmetry_residual
from .oracle import brute_force_value
from .pathwise_value import dpp_residual, hopf_cole_gaussian, hopf_cole_reference, solve, value_summary
from .problem import CatalogEntry
from .randomness import dump_path_csv, generate_path

OUTPUT_ENV = "PATHCTL_OUTPUT_DIR"


def _crit(name: str, value: float, limit: float, relation: str = "le") -> dict:
    value = float(value)
    ok = value <= limit if relation == "le" else value >= limit
    return {"name": name, "value": value, "limit": float(limit), "relation": relation, "passed": bool(ok)}


def _second_derivative_bound(entry: CatalogEntry, dim: int) -> float:
    kind = entry.identifier
    kappa = abs(float(entry.param("kappa", 1.0)))
    if kind == "quadratic":
        return kappa
    if kind == "cosine":
        k = np.atleast_1d(np.asarray(entry.param("k", 1.0), dtype=float))
        return kappa * float(k @ k)
    if kind == "radial_cosine":
        return kappa * float(entry.param("k", 1.0)) ** 2 * dim
    return 0.0


def _path(cfg: ExperimentConfig, seed: int, out: Path):
    p = generate_path(seed, cfg.spec.horizon, cfg.spec.dim)
    dump_path_csv(p, out / f"path_seed{seed}.csv")
    return p


def _job_value(cfg, seed, out):
    spec, tol = cfg.spec, cfg.tolerances
    path = _path(cfg, seed, out)
    res = {"seed": seed, "methods": {}}
    crits = []
    cf = closed_form_for(spec, path)
    for m in cfg.methods:
        vf = solve(spec, path, m)
        dump_field_csv(vf.field(0), out / f"value_seed{seed}_{m}.csv")
        summ = value_summary(vf, spec, path)
        moduli = continuity_moduli(vf)
        summ.update(moduli)
        res["methods"][m] = summ
        if cf is not None:
            if cf.kind == "zero":
                crits.append(_crit(f"{m}.core_error", summ["core_error"], tol["zero_value"]))
            elif cf.kind == "linear":
                crits.append(_crit(f"{m}.core_error", summ["core_error"], tol["value_linear"]))
                drift = extract_drift(vf, spec.C)
                inner = (slice(None),) + (slice(1, -1),) * spec.dim
                gap = float(np.max(np.abs(drift.values[inner] - cf.drift_table()[inner])))
                summ["drift_error"] = gap
                crits.append(_crit(f"{m}.drift_error", gap, tol["drift_linear"]))
            else:
                limit = tol["value_rel"] * (1.0 + summ["closed_form_max"])
                crits.append(_crit(f"{m}.core_error", summ["core_error"], limit))
        if spec.terminal.lipschitz and spec.potential.lipschitz:
            radius = math.sqrt(spec.dim) * max(abs(spec.space.lower), abs(spec.space.upper))
            T = spec.horizon.T - spec.horizon.t0
            bound = spec.terminal.lipschitz_bound(spec.dim, radius) + T * spec.potential.lipschitz_bound(spec.dim, radius)
            crits.append(_crit(f"{m}.lip_x", moduli["lip_x"], bound * (1.0 + tol["lipschitz_slack"]) + 1e-12))
    res["criteria"] = crits
    return res


def _job_oracle(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    modes = ("enumerate", "lattice-dp") if s["mode"] == "both" else (s["mode"],)
    res = {"seed": seed, "oracle": {}, "methods": {}}
    crits = []
    values = {}
    for mode in modes:
        r = brute_force_value(spec, path, s["t_index"], s["x"], s["K_ctrl"], mode=mode,
                              max_enumeration=s["max_enumeration"])
        values[mode] = r.value
        res["oracle"][mode] = r.report()
    first = values[modes[0]]
    for m in cfg.methods:
        vf = solve(spec, path, m)
        sv = interpolate(vf.field(s["t_index"]), s["x"])
        gap = abs(first - sv)
        res["methods"][m] = {"solver_value": sv, "gap": gap}
        crits.append(_crit(f"{m}.oracle_gap", gap, tol["oracle_gap"]))
    if len(modes) == 2:
        d = abs(values["enumerate"] - values["lattice-dp"])
        res["mode_gap"] = d
        crits.append(_crit("oracle.mode_gap", d, tol["oracle_modes"]))
    res["criteria"] = crits
    return res


def _job_dpp(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    rng = np.random.default_rng([seed, 4])
    N = spec.horizon.N
    top = N - max(s["steps"])
    if top < 0:
        raise ConfigurationError(f"dpp steps {max(s['steps'])} exceed N={N}")
    core = spec.space.core_slices(s["core_fraction"])[0]
    ax = spec.space.axis[core]
    samples = [(int(rng.integers(0, top + 1)), rng.uniform(ax[0], ax[-1], spec.dim)) for _ in range(s["points"])]
    res = {"seed": seed, "methods": {}}
    crits = []
    for m in cfg.methods:
        vf = solve(spec, path, m)
        rows, worst = [], {}
        for steps in s["steps"]:
            for k, x in samples:
                r = dpp_residual(vf, spec, path, k, x, steps)
                rows.append((steps, k, x, r))
                worst[steps] = max(worst.get(steps, 0.0), r)
        with open(out / f"dpp_seed{seed}_{m}.csv", "w") as fh:
            fh.write("m,t_index," + ",".join(f"x_{i + 1}" for i in range(spec.dim)) + ",residual\n")
            for steps, k, x, r in rows:
                fh.write(f"{steps},{k}," + ",".join(repr(float(c)) for c in x) + f",{r!r}\n")
        res["methods"][m] = {f"max_residual_m{k}": v for k, v in worst.items()}
        crits += [_crit(f"{m}.dpp_m{k}", v, tol["dpp"]) for k, v in worst.items()]
    res["criteria"] = crits
    return res


def _job_drift(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    res = {"seed": seed, "methods": {}}
    crits = []
    for m in cfg.methods:
        vf = solve(spec, path, m)
        drift = extract_drift(vf, spec.C, strict=s["strict"])
        opt = simulate_optimal(spec, path, drift, 0, s["x"], s["scheme"])
        dump_trajectory_csv(opt, out / f"trajectory_seed{seed}_{m}.csv")
        path_res, term = momentum_terms(drift, opt.state, spec)
        spde = drift_spde_residual(drift, path, spec)
        term_limit = tol["terminal_factor"] * spec.space.h * _second_derivative_bound(spec.terminal, spec.dim) + 1e-10
        res["methods"][m] = {"momentum_residual": path_res, "terminal_gap": term, "drift_spde_residual": spde,
                             "clamped": drift.clamped, "exited": opt.exited}
        crits += [_crit(f"{m}.momentum", path_res, tol["momentum"]),
                  _crit(f"{m}.terminal_gap", term, term_limit),
                  _crit(f"{m}.drift_spde", spde, tol["drift_spde"])]
    res["criteria"] = crits
    return res


def _symmetry(cfg) -> SymmetryField:
    if cfg.settings["symmetry"] == "rotation":
        return SymmetryField.rotation([[0.0, -1.0], [1.0, 0.0]])
    return SymmetryField.time_translation(cfg.spec.dim)


def _job_invariants(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    sym = _symmetry(cfg)
    res = {"seed": seed, "methods": {}}
    crits = []
    for m in cfg.methods:
        vf = solve(spec, path, m)
        drift = extract_drift(vf, spec.C)
        opt = simulate_optimal(spec, path, drift, 0, s["x"])
        trace = conserved_quantity(sym, drift, opt.state, spec, path)
        trace.dump_csv(out / f"quantity_seed{seed}_{m}.csv")
        qmax = float(np.max(np.abs(trace.Q)))
        sres = symmetry_residual(sym, drift, opt.state, spec, s["guard"])
        res["methods"][m] = {"max_residual": trace.max_residual, "max_abs_Q": qmax, "symmetry_residual": sres}
        crits += [_crit(f"{m}.conserved", trace.max_residual, tol["conserved_rel"] * (1.0 + qmax)),
                  _crit(f"{m}.symmetry", sres, tol["symmetry"])]
    res["criteria"] = crits
    return res


def _job_comparison(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    res = {"seed": seed, "methods": {}}
    crits = []
    for m in cfg.methods:
        rep = comparison_check(spec, path, s["S1"], s["S2"], m, tol["comparison"])
        res["methods"][m] = rep.as_dict()
        crits.append(_crit(f"{m}.positive_part", rep.positive_part, tol["comparison"]))
        if rep.offset_gap is not None:
            crits.append(_crit(f"{m}.offset_gap", rep.offset_gap, tol["comparison"]))
    res["criteria"] = crits
    return res


def _job_convergence(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    res = {"seed": seed, "methods": {}}
    crits = []
    for m in cfg.methods:
        rep = convergence_study(spec, path, s["levels"], s["reference"], m)
        rep.dump_csv(out / f"convergence_seed{seed}_{m}.csv")
        res["methods"][m] = rep.as_dict()
        if s["reference"] == "closed-form":
            slope = rep.slope if rep.slope is not None else math.inf
            crits.append(_crit(f"{m}.slope", slope, tol["slope_min"], "ge"))
        else:
            crits.append(_crit(f"{m}.decreasing", float(rep.strictly_decreasing()), 1.0, "ge"))
    if len(cfg.methods) == 2:
        gaps = cross_method_gaps(spec, path, s["levels"])
        res["cross_method_gaps"] = gaps
        crits.append(_crit("cross_method.shrinking", float(all(b < a for a, b in zip(gaps, gaps[1:]))), 1.0, "ge"))
    res["criteria"] = crits
    return res


def _job_hopf_cole(cfg, seed, out):
    spec, tol, s = cfg.spec, cfg.tolerances, cfg.settings
    path = _path(cfg, seed, out)
    f_entry = s["f"]
    f = ScalarField(spec.space, f_entry.value(spec.space.points), spec.boundary_mode)
    r = hopf_cole_reference(spec.nu, path, spec.space, f, s["accumulation"])
    dump_field_csv(r.logeta.field(spec.horizon.N), out / f"logeta_seed{seed}.csv")
    res = {"seed": seed, "residual": r.residual, "truncation": r.truncation}
    crits = []
    core = spec.space.core_slices()[0]
    if f_entry.identifier in ("zero", "constant"):
        c = float(f_entry.value(np.zeros((1, 1)))[0])
        dev = float(np.max(np.abs(r.logeta.values[:, core] - c)))
        res["constant_deviation"] = dev
        crits += [_crit("residual_constant", r.residual, tol["hopf_cole_zero"]),
                  _crit("constant_deviation", dev, tol["hopf_cole_zero"])]
    else:
        crits.append(_crit("ito_residual", r.residual, tol["hopf_cole_ito"]))
        if (f_entry.identifier == "quadratic" and float(f_entry.param("kappa", 1.0)) < 0
                and f_entry.offset == 0.0):
            exact = hopf_cole_gaussian(spec.nu, path, spec.space, -float(f_entry.param("kappa", 1.0)))
            err = float(np.max(np.abs(r.eta.values[:, core] - exact[:, core])))
            res["quadrature_error"] = err
            crits.append(_crit("quadrature_error", err, tol["hopf_cole_quadrature"]))
    res["criteria"] = crits
    return res


_JOBS = {
    "value": _job_value,
    "oracle-compare": _job_oracle,
    "dpp": _job_dpp,
    "drift": _job_drift,
    "invariants": _job_invariants,
    "comparison": _job_comparison,
    "convergence": _job_convergence,
    "hopf-cole": _job_hopf_cole,
}


def _run_job(cfg: ExperimentConfig, seed: int, out: str) -> dict:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ProvenanceWarning)
        return _JOBS[cfg.subcommand](cfg, seed, Path(out))


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def run_experiment(cfg: ExperimentConfig, out_dir, workers: int | None = None) -> tuple[int, dict]:
    """Run every seed, write ``summary.json`` and return ``(exit status, summary)``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    n = workers or cfg.workers
    if n > 1 and len(cfg.seeds) > 1:
        with ProcessPoolExecutor(max_workers=n) as pool:
            results = list(pool.map(_run_job, [cfg] * len(cfg.seeds), cfg.seeds, [str(out)] * len(cfg.seeds)))
    else:
        results = [_run_job(cfg, s, str(out)) for s in cfg.seeds]
    results.sort(key=lambda r: r["seed"])
    criteria = [dict(c, seed=r["seed"]) for r in results for c in r["criteria"]]
    aggregate = _aggregate(cfg, results)
    criteria += aggregate
    summary = {
        "subcommand": cfg.subcommand,
        "config_hash": cfg.config_hash,
        "seeds": list(cfg.seeds),
        "methods": list(cfg.methods),
        "versions": {"pathctl": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
                     "python": platform.python_version()},
        "problem": cfg.spec.describe(),
        "settings": {k: (v.label() if isinstance(v, CatalogEntry) else v) for k, v in cfg.settings.items()},
        "tolerances": cfg.tolerances,
        "results": results,
        "criteria": criteria,
        "passed": all(c["passed"] for c in criteria),
    }
    summary = _clean(summary)
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return (0 if summary["passed"] else 1), summary


def _aggregate(cfg: ExperimentConfig, results: list) -> list:
    """Cross-seed criteria: the mean time exponent over at least ten seeds."""
    if cfg.subcommand != "value" or len(results) < 10:
        return []
    out = []
    for m in cfg.methods:
        mean = float(np.mean([r["methods"][m]["holder_t"] for r in results]))
        out.append(dict(_crit(f"{m}.holder_t_mean_low", mean, 0.35, "ge"), seed=None))
        out.append(dict(_crit(f"{m}.holder_t_mean_high", mean, 0.65), seed=None))
    return out


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="pathctl", description="Pathwise stochastic control experiments")
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="experiment config file")
    parser.add_argument("--out", help=f"output directory (default ${OUTPUT_ENV} or ./pathctl-out)")
    parser.add_argument("--workers", type=int, help="worker processes (overrides the config)")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, args.subcommand)
        if args.workers is not None and args.workers < 1:
            raise ConfigurationError("--workers must be at least 1")
        out = args.out or os.environ.get(OUTPUT_ENV) or "pathctl-out"
        status, summary = run_experiment(cfg, out, args.workers)
    except (ConfigurationError, PreconditionError) as exc:
        print(f"pathctl: error: {exc}", file=sys.stderr)
        return 2
    for c in summary["criteria"]:
        if not c["passed"]:
            rel = "<=" if c["relation"] == "le" else ">="
            where = f"seed {c['seed']}: " if c.get("seed") is not None else ""
            print(f"FAIL {where}{c['name']} = {c['value']!r} (needs {rel} {c['limit']!r})", file=sys.stderr)
    print(f"{cfg.subcommand}: {'pass' if status == 0 else 'FAIL'} ({len(summary['criteria'])} criteria) -> {out}")
    return status


if __name__ == "__main__":
    sys.exit(main())
