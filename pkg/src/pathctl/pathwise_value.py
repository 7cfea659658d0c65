"""Value process for one fixed Brownian path, by shift representation and by splitting.

Also hosts the one-step dynamic programming check and the log-transformed
stochastic heat equation reference.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, ndtr

from .closed_form import closed_form_for
from .errors import ConfigurationError, NumericalRangeError
from .fields import ScalarField, SpaceGrid, gradient_array, interp_array
from .hj_core import TimeDependentPotential, ValueSequence, _stepper, solve_hj_backward
from .oracle import lattice_dp
from .problem import ProblemSpec
from .randomness import BrownianPath

METHODS = ("shift", "splitting")


@dataclass(frozen=True, eq=False)
class ValueField:
    """Value process on the space grid at every time node, in original coordinates."""

    sequence: ValueSequence
    path_id: str
    method: str
    moving: np.ndarray | None = None
    shifts: np.ndarray | None = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigurationError(f"unknown value method {self.method!r}")
        if (self.moving is None) != (self.shifts is None):
            raise ConfigurationError("moving-frame values and shifts come together")

    @property
    def values(self) -> np.ndarray:
        return self.sequence.values

    @property
    def grid(self):
        return self.sequence.grid

    @property
    def space(self) -> SpaceGrid:
        return self.sequence.space

    def field(self, k: int) -> ScalarField:
        return self.sequence.field(k)

    def lipschitz_estimate(self) -> float:
        g = np.abs(gradient_array(self.space, np.moveaxis(self.values, 0, -1)))
        return float(np.max(g))


def _check(spec: ProblemSpec, path: BrownianPath) -> None:
    if path.grid != spec.horizon:
        raise ConfigurationError(
            f"path grid (t0={path.grid.t0}, T={path.grid.T}, N={path.grid.N}) differs from the problem "
            f"horizon (t0={spec.horizon.t0}, T={spec.horizon.T}, N={spec.horizon.N})")
    if path.dim != spec.dim:
        raise ConfigurationError(f"path has dim {path.dim}, problem has dim {spec.dim}")


def _terminal_values(spec: ProblemSpec) -> np.ndarray:
    return spec.terminal.value(spec.space.points)


def solve_by_shift(spec: ProblemSpec, path: BrownianPath) -> ValueField:
    """Solve the deterministic equation in moving coordinates, then shift back."""
    _check(spec, path)
    space, mode = spec.space, spec.boundary_mode
    shifts = np.sqrt(spec.nu) * (path.values - path.values[0])
    pot = TimeDependentPotential(spec.potential, shifts, spec.horizon)
    pts = space.points
    terminal = ScalarField(space, spec.terminal.value(pts + shifts[-1]), mode)
    w = solve_hj_backward(spec, pot, terminal)
    out = np.empty_like(w.values)
    for k in range(spec.horizon.N):
        out[k], _ = interp_array(space, w.values[k], pts - shifts[k], mode)
    out[-1] = _terminal_values(spec)
    seq = ValueSequence(spec.horizon, space, out, "shift", mode)
    return ValueField(seq, path.identifier, "shift", w.values, shifts)


def solve_by_splitting(spec: ProblemSpec, path: BrownianPath) -> ValueField:
    """Backward steps: Hopf-Lax update with static potential, then exact transport."""
    _check(spec, path)
    space, mode = spec.space, spec.boundary_mode
    grid = spec.horizon
    step = _stepper(spec, space, grid.delta)
    pts = space.points
    V = spec.potential.value(pts)
    dW = np.sqrt(spec.nu) * path.increments
    out = np.empty((grid.N + 1,) + space.shape)
    out[-1] = _terminal_values(spec)
    for k in range(grid.N - 1, -1, -1):
        stage = step(out[k + 1], V)
        out[k], _ = interp_array(space, stage, pts + dW[k], mode)
    seq = ValueSequence(grid, space, out, "splitting", mode)
    return ValueField(seq, path.identifier, "splitting")


def solve(spec: ProblemSpec, path: BrownianPath, method: str = "shift") -> ValueField:
    if method == "shift":
        return solve_by_shift(spec, path)
    if method == "splitting":
        return solve_by_splitting(spec, path)
    raise ConfigurationError(f"unknown value method {method!r}; known: {', '.join(METHODS)}")


def dpp_residual(vf: ValueField, spec: ProblemSpec, path: BrownianPath, t_index: int, x, m: int) -> float:
    """Gap between the stored value and an m-step lattice minimization of cost-to-go.

    Every m-step lattice control sequence is covered: the state after j steps
    depends on the controls only through their integer partial sum, so the
    minimum is an exact dynamic program over partial sums.
    """
    N = spec.horizon.N
    if m < 1 or t_index < 0 or t_index + m > N:
        raise ConfigurationError(f"need 0 <= t_index and t_index + m <= N, got t_index={t_index}, m={m}, N={N}")
    dim, K, C = spec.dim, spec.control_K, spec.control_bound
    x = np.asarray(x, dtype=float).reshape(dim)
    lattice = spec.lattice()
    offsets = np.rint(lattice * K / C).astype(int)
    mode = vf.sequence.boundary_mode
    end = vf.values[t_index + m]

    def terminal(z):
        return interp_array(vf.space, end, z, mode)[0]

    best = lattice_dp(spec, path, t_index, x, m, lattice, offsets, spec.horizon.delta * C / K, terminal)
    target, _ = interp_array(vf.space, vf.values[t_index], x[None, :], mode)
    return float(abs(target[0] - best))


def value_summary(vf: ValueField, spec: ProblemSpec, path: BrownianPath, core_fraction: float = 0.5) -> dict:
    """JSON-ready summary; includes the core error when a closed form exists."""
    out = {
        "seed": path.seed,
        "path": vf.path_id,
        "method": vf.method,
        "space": spec.space.describe(),
        "horizon": {"t0": spec.horizon.t0, "T": spec.horizon.T, "N": spec.horizon.N},
        "max_abs_value": float(np.max(np.abs(vf.values))),
        "lipschitz_estimate": vf.lipschitz_estimate(),
    }
    cf = closed_form_for(spec, path)
    if cf is not None:
        core = (slice(None),) + spec.space.core_slices(core_fraction)
        exact = cf.value_table()
        out["core_error"] = float(np.max(np.abs(vf.values[core] - exact[core])))
        out["closed_form_max"] = float(np.max(np.abs(exact[core])))
    return out


@dataclass(frozen=True, eq=False)
class HopfColeResult:
    eta: ValueSequence
    logeta: ValueSequence
    residual: float
    truncation: float


def hopf_cole_reference(nu: float, path: BrownianPath, grid: SpaceGrid, f: ScalarField,
                        accumulation: str = "logsumexp", core_fraction: float = 0.5) -> HopfColeResult:
    """Positive solution of the stochastic heat equation by Gaussian quadrature on the grid.

    ``eta(t, x)`` is the heat kernel of variance ``nu (t - t0)`` centred at
    ``x - sqrt(nu) W_t`` applied to ``exp(f)``.  Trapezoid weights are
    renormalised to unit mass so constants are reproduced exactly; the kernel
    mass lost to the truncated domain is reported as ``truncation`` (max over
    core nodes).  ``residual`` is the max over steps and core nodes of the
    one-step Ito residual of ``log eta``.
    """
    if grid.dim != 1 or path.dim != 1 or f.grid != grid:
        raise ConfigurationError("the heat-equation reference is one-dimensional and needs f on the same grid")
    if accumulation not in ("logsumexp", "direct"):
        raise ConfigurationError(f"unknown accumulation {accumulation!r}")
    if not nu > 0:
        raise ConfigurationError(f"nu must be positive, got {nu}")
    tg = path.grid
    y = grid.axis
    fy = f.values
    logw = np.full(grid.M, math.log(grid.h))
    logw[[0, -1]] -= math.log(2.0)
    W = path.values[:, 0] - path.values[0, 0]
    core = grid.core_slices(core_fraction)[0]
    log_eta = np.empty((tg.N + 1, grid.M))
    log_eta[0] = fy
    trunc = 0.0
    top = float(np.max(fy))
    for k in range(1, tg.N + 1):
        var = nu * (tg.node(k) - tg.t0)
        centre = y - math.sqrt(nu) * W[k]
        expo = -((centre[:, None] - y[None, :]) ** 2) / (2.0 * var) + logw[None, :]
        if accumulation == "logsumexp":
            rowmax = expo.max(axis=1, keepdims=True)
            E = np.exp(expo - rowmax)
            num = E @ np.exp(fy - top)
            row = np.log(num, where=num > 0, out=np.full_like(num, -np.inf)) + top - np.log(E.sum(axis=1))
            bad = ~np.isfinite(row)
            if np.any(bad):
                row[bad] = (logsumexp(expo[bad] + fy[None, :], axis=1) - logsumexp(expo[bad], axis=1))
            log_eta[k] = row
        else:
            norm = logsumexp(expo, axis=1)
            eta = np.exp(expo + fy[None, :]).sum(axis=1) / np.exp(norm)
            if np.any(eta <= 0.0) or not np.all(np.isfinite(eta)):
                raise NumericalRangeError(
                    f"eta underflows at time node {k}; use accumulation='logsumexp' (the default)")
            log_eta[k] = np.log(eta)
        sd = math.sqrt(var)
        c = centre[core]
        lost = ndtr((grid.lower - c) / sd) + ndtr((c - grid.upper) / sd)
        trunc = max(trunc, float(np.max(lost)) * math.exp(top))
    eta_vals = np.exp(log_eta)
    if accumulation == "direct" and np.any(eta_vals <= 0.0):
        raise NumericalRangeError("eta underflows; use accumulation='logsumexp' (the default)")

    h, delta = grid.h, tg.delta
    u = log_eta
    ux = (u[:, 2:] - u[:, :-2]) / (2.0 * h)
    uxx = (u[:, 2:] - 2.0 * u[:, 1:-1] + u[:, :-2]) / h ** 2
    dW = np.diff(W)[:, None]
    r = (u[1:, 1:-1] - u[:-1, 1:-1] + math.sqrt(nu) * ux[:-1] * dW
         - nu * (uxx[:-1] + 0.5 * ux[:-1] ** 2) * delta)
    lo, hi = max(core.start - 1, 0), min(core.stop - 1, grid.M - 2)
    residual = float(np.max(np.abs(r[:, lo:hi]))) if r.size else 0.0
    eta = ValueSequence(tg, grid, eta_vals, "hopf-cole", f.boundary_mode)
    logeta = ValueSequence(tg, grid, log_eta, "hopf-cole", f.boundary_mode)
    return HopfColeResult(eta, logeta, residual, trunc)


def hopf_cole_gaussian(nu: float, path: BrownianPath, grid: SpaceGrid, a: float = 1.0) -> np.ndarray:
    """Exact ``eta`` for ``f(y) = -a y^2/2`` (``a > 0``) at every node, shape ``(N+1, M)``."""
    tg = path.grid
    s = a * nu * (tg.nodes - tg.t0)[:, None]
    m = grid.axis[None, :] - math.sqrt(nu) * (path.values[:, :1] - path.values[0, 0])
    return (1.0 + s) ** -0.5 * np.exp(-a * m ** 2 / (2.0 * (1.0 + s)))
