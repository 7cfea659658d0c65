"""Comparison checks, continuity moduli and refinement studies."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .closed_form import closed_form_for
from .errors import ConfigurationError, PreconditionError
from .pathwise_value import ValueField, solve
from .problem import CatalogEntry, ProblemSpec
from .randomness import BrownianPath, refine_path

COMPARISON_TOL = 1e-10


@dataclass(frozen=True)
class ComparisonReport:
    positive_part: float
    offset: float | None
    offset_gap: float | None
    passed: bool
    tol: float = COMPARISON_TOL

    def as_dict(self) -> dict:
        return {"positive_part": self.positive_part, "offset": self.offset,
                "offset_gap": self.offset_gap, "passed": self.passed, "tol": self.tol}


def comparison_check(spec: ProblemSpec, path: BrownianPath, S1: CatalogEntry, S2: CatalogEntry,
                     method: str = "shift", tol: float = COMPARISON_TOL) -> ComparisonReport:
    """Sup over nodes and times of ``(U1 - U2)+`` for terminal costs ``S1 <= S2``.

    When ``S2 - S1`` is constant on the grid the report also carries the max
    deviation of ``U2 - U1`` from that constant.
    """
    pts = spec.space.points
    s1, s2 = S1.value(pts), S2.value(pts)
    diff = s1 - s2
    if np.any(diff > 0):
        idx = np.unravel_index(int(np.argmax(diff)), diff.shape)
        raise PreconditionError(
            f"terminal costs are not ordered: S1 - S2 = {diff[idx]:.6g} > 0 at node {tuple(int(i) for i in idx)} "
            f"(x = {pts[idx].tolist()})")
    U1 = solve(spec.replace(terminal=S1), path, method).values
    U2 = solve(spec.replace(terminal=S2), path, method).values
    pos = float(np.max(np.maximum(U1 - U2, 0.0)))
    offset = offset_gap = None
    gap = s2 - s1
    if np.ptp(gap) <= 1e-12 * max(1.0, float(np.max(np.abs(gap)))):
        offset = float(np.mean(gap))
        offset_gap = float(np.max(np.abs(U2 - U1 - offset)))
    passed = pos <= tol and (offset_gap is None or offset_gap <= tol)
    return ComparisonReport(pos, offset, offset_gap, passed, tol)


def _core_probe_indices(vf: ValueField, n: int, core_fraction: float) -> list[tuple[int, ...]]:
    core = vf.space.core_slices(core_fraction)
    ranges = [np.arange(s.start, s.stop) for s in core]
    grids = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, vf.space.dim)
    pick = np.unique(np.linspace(0, grids.shape[0] - 1, n).round().astype(int))
    return [tuple(int(v) for v in grids[i]) for i in pick]


def continuity_moduli(vf: ValueField, core_fraction: float = 0.5, n_points: int = 20) -> dict:
    """Spatial Lipschitz constant over the core and a fitted time Hölder exponent.

    The exponent is the least-squares slope of ``log|U_t(x) - U_t'(x)|`` on
    ``log|t - t'|`` for lags between one step and a quarter of the horizon,
    averaged over ``n_points`` core nodes.
    """
    U = vf.values
    h = vf.space.h
    core = (slice(None),) + vf.space.core_slices(core_fraction)
    Uc = U[core]
    lip = 0.0
    for ax in range(1, Uc.ndim):
        d = np.abs(np.diff(Uc, axis=ax)) / h
        if d.size:
            lip = max(lip, float(np.max(d)))
    g = vf.grid
    delta, span = g.delta, g.T - g.t0
    max_lag = int(np.floor(span / 4.0 / delta + 1e-9))
    slopes = []
    if max_lag >= 2:
        lags = np.arange(1, max_lag + 1)
        for node in _core_probe_indices(vf, n_points, core_fraction):
            series = U[(slice(None),) + node]
            xs, ys = [], []
            for lag in lags:
                inc = np.abs(series[lag:] - series[:-lag])
                ok = inc > 0
                xs.append(np.full(int(ok.sum()), np.log(lag * delta)))
                ys.append(np.log(inc[ok]))
            x, y = np.concatenate(xs), np.concatenate(ys)
            if x.size >= 2 and np.ptp(x) > 0:
                slopes.append(float(np.polyfit(x, y, 1)[0]))
    degenerate = lip == 0.0 and not slopes
    holder = float(np.mean(slopes)) if slopes else 0.0
    return {"lip_x": lip, "holder_t": holder, "degenerate": degenerate}


@dataclass(frozen=True)
class ConvergenceReport:
    deltas: tuple
    hs: tuple
    errors: tuple
    slope: float | None
    reference: str
    method: str
    extra: dict = field(default_factory=dict)

    @property
    def applicable(self) -> bool:
        return self.slope is not None

    def strictly_decreasing(self) -> bool:
        e = np.asarray(self.errors)
        return bool(np.all(e[1:] < e[:-1]))

    def as_dict(self) -> dict:
        return {"deltas": list(self.deltas), "hs": list(self.hs), "errors": list(self.errors),
                "slope": self.slope, "reference": self.reference, "method": self.method, **self.extra}

    def dump_csv(self, target) -> None:
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["level", "delta", "h", "error"])
            for i, (d, h, e) in enumerate(zip(self.deltas, self.hs, self.errors)):
                w.writerow([i, repr(float(d)), repr(float(h)), repr(float(e))])


def fit_slope(deltas, errors) -> float | None:
    d, e = np.asarray(deltas, dtype=float), np.asarray(errors, dtype=float)
    if np.any(e <= 0) or len(e) < 2:
        return None
    return float(np.polyfit(np.log(d), np.log(e), 1)[0])


def refinement_levels(spec: ProblemSpec, base_path: BrownianPath, levels: int):
    """Problem and path at each level, halving step and spacing together on one path."""
    if base_path.grid != spec.horizon:
        raise ConfigurationError("base path grid differs from the problem horizon")
    out = []
    path, sp = base_path, spec
    for lev in range(levels):
        if lev:
            path = refine_path(path)
            sp = sp.replace(horizon=sp.horizon.refined(), space=sp.space.refined())
        out.append((sp, path))
    return out


def _coarse_view(fine: np.ndarray, factor: int, dim: int) -> np.ndarray:
    sl = (slice(None, None, factor),) * (1 + dim)
    return fine[sl]


def convergence_study(spec: ProblemSpec, base_path: BrownianPath, levels: int, reference: str = "closed-form",
                      method: str = "shift", core_fraction: float = 0.5) -> ConvergenceReport:
    """Core max-norm errors over simultaneous step/spacing halving.

    ``reference="finest"`` solves one extra level and compares every coarser
    level with it at the shared nodes.
    """
    if levels < 3:
        raise ConfigurationError(f"a convergence study needs at least 3 levels, got {levels}")
    if reference not in ("closed-form", "finest"):
        raise ConfigurationError(f"unknown reference {reference!r}")
    n_solve = levels + (reference == "finest")
    lv = refinement_levels(spec, base_path, n_solve)
    sols = [solve(sp, p, method) for sp, p in lv]
    errors = []
    if reference == "closed-form":
        for (sp, p), vf in zip(lv, sols):
            cf = closed_form_for(sp, p)
            if cf is None:
                raise ConfigurationError("no closed form for this problem; use reference='finest'")
            core = (slice(None),) + sp.space.core_slices(core_fraction)
            errors.append(float(np.max(np.abs(vf.values[core] - cf.value_table()[core]))))
    else:
        fine = sols[-1].values
        for lev in range(levels):
            sp = lv[lev][0]
            ref = _coarse_view(fine, 2 ** (levels - lev), sp.dim)
            core = (slice(None),) + sp.space.core_slices(core_fraction)
            errors.append(float(np.max(np.abs(sols[lev].values[core] - ref[core]))))
    deltas = tuple(sp.horizon.delta for sp, _ in lv[:levels])
    hs = tuple(sp.space.h for sp, _ in lv[:levels])
    slope = None if max(errors) <= 1e-13 else fit_slope(deltas, errors)
    return ConvergenceReport(deltas, hs, tuple(errors), slope, reference, method)


def cross_method_gaps(spec: ProblemSpec, base_path: BrownianPath, levels: int, core_fraction: float = 0.5) -> list[float]:
    """Core max gap between the shift and splitting solutions at each level."""
    gaps = []
    for sp, p in refinement_levels(spec, base_path, levels):
        a, b = solve(sp, p, "shift"), solve(sp, p, "splitting")
        core = (slice(None),) + sp.space.core_slices(core_fraction)
        gaps.append(float(np.max(np.abs(a.values[core] - b.values[core]))))
    return gaps
