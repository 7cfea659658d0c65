"""Optimal drift extraction, optimal-state simulation and drift identity residuals."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PreconditionError
from .fields import SpaceGrid, VectorField, gradient_array, interp_array
from .oracle import StatePath
from .pathwise_value import ValueField
from .problem import ProblemSpec
from .randomness import BrownianPath, TimeGrid


@dataclass(frozen=True, eq=False)
class DriftField:
    grid: TimeGrid
    space: SpaceGrid
    values: np.ndarray
    path_id: str
    boundary_mode: str = "linear"
    clamped: int = 0
    clamped_core: int = 0
    moving: np.ndarray | None = None

    def __post_init__(self):
        expected = (self.grid.N + 1,) + self.space.shape + (self.space.dim,)
        for name in ("values", "moving"):
            raw = getattr(self, name)
            if raw is None:
                continue
            vals = np.array(raw, dtype=float, copy=True)
            if vals.shape != expected:
                raise ConfigurationError(f"drift {name} have shape {vals.shape}, expected {expected}")
            vals.setflags(write=False)
            object.__setattr__(self, name, vals)

    def field(self, k: int) -> VectorField:
        return VectorField(self.space, self.values[k], self.boundary_mode)

    def at(self, k: int, z) -> tuple[np.ndarray, int]:
        """Drift at node ``k`` and points ``z``; also the number of points off the grid."""
        z = np.asarray(z, dtype=float)
        return interp_array(self.space, self.values[k], z, self.boundary_mode)


def extract_drift(vf: ValueField, C: float = np.inf, strict: bool = False, core_fraction: float = 0.5) -> DriftField:
    """Negative spatial gradient of the value field, clamped to the ball of radius ``C``.

    ``strict`` raises if any core node needed clamping, a sign that ``C`` is too small.
    A field solved in moving coordinates is differentiated there and shifted
    back once; the moving-frame drift is kept for the drift equation check.
    """
    space = vf.space
    moving = None
    if vf.moving is not None:
        moving = -np.stack([gradient_array(space, w) for w in vf.moving])
        pts = space.points
        u = np.stack([interp_array(space, moving[k], pts - vf.shifts[k], vf.sequence.boundary_mode)[0]
                      for k in range(vf.grid.N + 1)])
        u[-1] = -gradient_array(space, vf.values[-1])
    else:
        u = -np.stack([gradient_array(space, vf.values[k]) for k in range(vf.grid.N + 1)])
    norms = np.sqrt(np.sum(u * u, axis=-1, keepdims=True))
    over = norms[..., 0] > C
    n_over = int(np.count_nonzero(over))
    core = (slice(None),) + space.core_slices(core_fraction)
    n_core = int(np.count_nonzero(over[core]))
    if strict and n_core:
        raise PreconditionError(f"drift clamped at {n_core} core nodes; the control bound C={C} is too small")
    if n_over:
        u = np.where(over[..., None], u * (C / np.maximum(norms, 1e-300)), u)
    if moving is not None:
        mn = np.sqrt(np.sum(moving * moving, axis=-1, keepdims=True))
        moving = np.where(mn > C, moving * (C / np.maximum(mn, 1e-300)), moving)
    return DriftField(vf.grid, space, u, vf.path_id, vf.sequence.boundary_mode, n_over, n_core, moving)


@dataclass(frozen=True, eq=False)
class OptimalPath:
    state: StatePath
    drift: np.ndarray
    exited: bool
    outside_queries: int


def simulate_optimal(spec: ProblemSpec, path: BrownianPath, drift: DriftField, t_index: int, x,
                     scheme: str = "euler") -> OptimalPath:
    """Integrate the optimal state with exact noise increments.

    ``scheme="heun"`` averages the drift at both ends of the step (predictor-corrector).
    Leaving the grid sets ``exited``; the extrapolated drift is used there.
    """
    if scheme not in ("euler", "heun"):
        raise ConfigurationError(f"unknown scheme {scheme!r}")
    if drift.grid != path.grid or not 0 <= t_index < path.grid.N:
        raise ConfigurationError("drift must cover the path grid from t_index on")
    delta = path.grid.delta
    noise = np.sqrt(spec.nu) * np.diff(path.values[t_index:], axis=0)
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    n = path.grid.N - t_index
    Z = np.empty((n + 1, spec.dim))
    U = np.empty((n + 1, spec.dim))
    Z[0] = x
    outside = 0
    for j in range(n):
        k = t_index + j
        uk, o = drift.at(k, Z[j][None, :])
        outside += o
        U[j] = uk[0]
        if scheme == "euler":
            Z[j + 1] = Z[j] + delta * U[j] + noise[j]
        else:
            pred = Z[j] + delta * U[j] + noise[j]
            un, o2 = drift.at(k + 1, pred[None, :])
            outside += o2
            Z[j + 1] = Z[j] + 0.5 * delta * (U[j] + un[0]) + noise[j]
    ul, o = drift.at(path.grid.N, Z[-1][None, :])
    outside += o
    U[-1] = ul[0]
    return OptimalPath(StatePath(path.grid, Z, t_index, x), U, outside > 0, outside)


def momentum_terms(drift: DriftField, state: StatePath, spec: ProblemSpec) -> tuple[float, float]:
    """(max path residual, terminal gap) of the momentum identity along ``state``."""
    k0 = state.start
    Z = state.values
    u = np.stack([drift.at(k0 + j, Z[j][None, :])[0][0] for j in range(Z.shape[0])])
    delta = state.grid.delta
    gV = spec.potential.gradient(Z[:-1]) * delta
    acc = np.zeros_like(u)
    np.cumsum(gV, axis=0, out=acc[1:])
    r = u - u[0] - acc
    path_res = float(np.max(np.sqrt(np.sum(r * r, axis=-1))))
    term = u[-1] + spec.terminal.gradient(Z[-1])
    return path_res, float(np.sqrt(np.sum(term * term)))


def momentum_residual(drift: DriftField, state: StatePath, spec: ProblemSpec) -> float:
    path_res, term = momentum_terms(drift, state, spec)
    return path_res + term


def drift_spde_residual(drift: DriftField, path: BrownianPath, spec: ProblemSpec, core_fraction: float = 0.5) -> float:
    """Max core residual of the drift equation in coordinates moving with the noise.

    Uses the drift's own moving-frame values when it has them; otherwise the
    drift is sampled at the shifted nodes.
    """
    space = drift.space
    pts = space.points
    shifts = np.sqrt(spec.nu) * (path.values - path.values[0])
    core = space.core_slices(core_fraction)
    delta = path.grid.delta
    prev = None
    worst = 0.0
    for k in range(path.grid.N + 1):
        if drift.moving is not None:
            cur = drift.moving[k]
        else:
            cur, _ = interp_array(space, drift.values[k], pts + shifts[k], drift.boundary_mode)
        if prev is not None:
            k0 = k - 1
            ut, u_prev = cur, prev
            jac = np.stack([gradient_array(space, u_prev[..., i]) for i in range(space.dim)], axis=-2)
            adv = np.einsum("...ij,...j->...i", jac, u_prev)
            r = (ut - u_prev) / delta + adv - spec.potential.gradient(pts + shifts[k0])
            worst = max(worst, float(np.max(np.sqrt(np.sum(r[core] ** 2, axis=-1)))))
        prev = cur
    return worst


def dump_trajectory_csv(opt: OptimalPath, target) -> None:
    st = opt.state
    dim = st.values.shape[1]
    header = ["k", "t"] + [f"z_{i + 1}" for i in range(dim)] + [f"ustar_{i + 1}" for i in range(dim)]
    with open(target, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for j, t in enumerate(st.times):
            w.writerow([st.start + j, repr(float(t))] + [repr(float(v)) for v in st.values[j]]
                       + [repr(float(v)) for v in opt.drift[j]])
