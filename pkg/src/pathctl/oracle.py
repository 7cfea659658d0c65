"""Brute-force evaluation of the pathwise control problem.

Nothing here touches the Hopf-Lax solver: states are simulated directly from
the path increments and costs are left Riemann sums.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, ConfigurationError
from .problem import ProblemSpec, control_lattice, lagrangian_gradient, lagrangian_value
from .randomness import BrownianPath, TimeGrid

DEFAULT_ENUMERATION_BUDGET = 10 ** 7
_CHUNK = 1 << 20


@dataclass(frozen=True, eq=False)
class ControlPath:
    """Piecewise-constant controls on steps ``start .. N-1`` of ``grid``."""

    grid: TimeGrid
    values: np.ndarray
    C: float
    start: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape[0] != self.grid.N - self.start:
            raise ConfigurationError(
                f"control has {vals.shape[0]} steps, grid has {self.grid.N - self.start} from node {self.start}")
        norms = np.sqrt(np.sum(vals * vals, axis=1))
        if np.any(norms > self.C * (1 + 1e-12)):
            raise ConfigurationError(f"control exceeds the bound C={self.C} (max |u|={norms.max():.6g})")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, grid: TimeGrid, u, C: float, start: int = 0) -> "ControlPath":
        u = np.asarray(u, dtype=float).reshape(1, -1)
        return cls(grid, np.repeat(u, grid.N - start, axis=0), C, start)

    @classmethod
    def zeros(cls, grid: TimeGrid, dim: int, C: float, start: int = 0) -> "ControlPath":
        return cls(grid, np.zeros((grid.N - start, dim)), C, start)


@dataclass(frozen=True, eq=False)
class StatePath:
    """States at nodes ``start .. N``; ``values[0]`` is the initial point."""

    grid: TimeGrid
    values: np.ndarray
    start: int
    x: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "x", np.array(self.x, dtype=float).reshape(-1))
        if vals.shape[0] != self.grid.N - self.start + 1:
            raise ConfigurationError("state path length does not match its grid")
        if not np.array_equal(vals[0], self.x):
            raise ConfigurationError("state path must start at x")

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes[self.start:]


def simulate_state(spec: ProblemSpec, path: BrownianPath, control: ControlPath, t_index: int, x) -> StatePath:
    if path.grid != control.grid or control.start != t_index:
        raise ConfigurationError("control grid must match the path grid from t_index on")
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    noise = np.sqrt(spec.nu) * np.diff(path.values[t_index:], axis=0)
    steps = control.values * path.grid.delta + noise
    Z = np.empty((steps.shape[0] + 1, spec.dim))
    Z[0] = x
    np.cumsum(steps, axis=0, out=Z[1:])
    Z[1:] += x
    return StatePath(path.grid, Z, t_index, x)


def evaluate_cost(spec: ProblemSpec, state: StatePath, control: ControlPath) -> float:
    delta = state.grid.delta
    u = control.values
    run = lagrangian_value(spec.lagrangian, u) + spec.potential.value(state.values[:-1])
    return float(delta * np.sum(run) + spec.terminal.value(state.values[-1]))


def adjoint_gradient(spec: ProblemSpec, state: StatePath, control: ControlPath) -> np.ndarray:
    """``dJ/du_k`` for every step, by the backward adjoint recursion."""
    delta = state.grid.delta
    Z = state.values
    gV = spec.potential.gradient(Z[1:-1]) if Z.shape[0] > 2 else np.zeros((0, spec.dim))
    lam = np.empty_like(control.values)
    acc = spec.terminal.gradient(Z[-1])
    for k in range(control.values.shape[0] - 1, -1, -1):
        lam[k] = acc
        if k > 0:
            acc = acc + delta * gV[k - 1]
    return delta * (lagrangian_gradient(spec.lagrangian, control.values) + lam)


def _round_toward_origin(a: np.ndarray) -> np.ndarray:
    fl = np.floor(a)
    frac = a - fl
    up = (frac > 0.5) | ((frac == 0.5) & (a < 0))
    return (fl + up).astype(int)


def lattice_dp(spec: ProblemSpec, path: BrownianPath, t_index: int, x, steps: int,
               lattice: np.ndarray, offsets: np.ndarray, unit: float, terminal) -> float:
    """Backward DP over a state lattice in path-shifted coordinates.

    The shifted state after j steps is ``x + unit * s`` with integer ``s``;
    control ``i`` moves ``s`` by ``offsets[i]``.  ``terminal`` maps actual
    states ``(..., dim)`` to terminal costs.  Returns the optimal cost from
    ``(t_index, x)``.
    """
    dim, delta = spec.dim, path.grid.delta
    x = np.asarray(x, dtype=float).reshape(dim)
    reach = int(np.max(np.abs(offsets))) if offsets.size else 0
    span = steps * reach
    L = 2 * span + 1
    ticks = np.arange(-span, span + 1)
    grid_s = np.stack(np.meshgrid(*([ticks] * dim), indexing="ij"), axis=-1) * unit
    noise = np.sqrt(spec.nu) * (path.values[t_index:t_index + steps + 1] - path.values[t_index])
    run = delta * lagrangian_value(spec.lagrangian, lattice)
    nxt = np.asarray(terminal(x + grid_s + noise[steps]), dtype=float)
    for j in range(steps - 1, -1, -1):
        best = np.full(nxt.shape, np.inf)
        for c, cost in zip(offsets, run):
            src = tuple(slice(max(0, -ci), L - max(0, ci)) for ci in c)
            dst = tuple(slice(max(0, ci), L - max(0, -ci)) for ci in c)
            view = best[src]
            np.minimum(view, cost + nxt[dst], out=view)
        nxt = best + delta * spec.potential.value(x + grid_s + noise[j])
    return float(nxt[(span,) * dim])


@dataclass(frozen=True, eq=False)
class OracleResult:
    value: float
    mode: str
    K_ctrl: int
    C: float
    steps: int
    control: ControlPath | None = None

    def report(self, solver_value: float | None = None) -> dict:
        out = {"mode": self.mode, "K_ctrl": self.K_ctrl, "C": self.C, "steps": self.steps, "value": self.value}
        if solver_value is not None:
            out["solver_value"] = float(solver_value)
            out["gap"] = abs(self.value - float(solver_value))
        return out


def _enumerate(spec, path, t_index, x, steps, lattice):
    dim, delta = spec.dim, path.grid.delta
    n = lattice.shape[0]
    noise = np.sqrt(spec.nu) * (path.values[t_index:t_index + steps + 1] - path.values[t_index])
    run = delta * lagrangian_value(spec.lagrangian, lattice)
    tail = 0
    while tail < steps and n ** (tail + 1) <= _CHUNK:
        tail += 1
    head = steps - tail
    # every tail combination as per-step lattice indices, first step slowest
    tail_idx = np.indices((n,) * tail).reshape(tail, -1) if tail else np.zeros((0, 1), dtype=int)
    tail_disp = np.zeros((tail_idx.shape[1], dim))
    best_val, best_seq = math.inf, None
    for prefix in itertools.product(range(n), repeat=head):
        pre = np.asarray(prefix, dtype=int)
        z = x.copy()
        cost0 = 0.0
        for j, i in enumerate(pre):
            cost0 += run[i] + delta * float(spec.potential.value(z + noise[j]))
            z = z + delta * lattice[i]
        cost = np.full(tail_idx.shape[1], cost0)
        disp = tail_disp.copy()
        for j in range(tail):
            i = tail_idx[j]
            state = z + disp + noise[head + j]
            cost += run[i] + delta * spec.potential.value(state)
            disp += delta * lattice[i]
        cost += spec.terminal.value(z + disp + noise[steps])
        a = int(np.argmin(cost))
        if cost[a] < best_val:
            best_val = float(cost[a])
            best_seq = np.concatenate([pre, tail_idx[:, a]]) if tail else pre
    return best_val, lattice[best_seq]


def brute_force_value(spec: ProblemSpec, path: BrownianPath, t_index: int, x, K_ctrl: int,
                      max_steps: int | None = None, mode: str = "auto",
                      max_enumeration: int = DEFAULT_ENUMERATION_BUDGET) -> OracleResult:
    """Minimum cost from ``(t_index, x)`` over piecewise-constant lattice controls.

    ``mode`` is ``"enumerate"`` (exhaustive search, limited by
    ``max_enumeration`` sequences), ``"lattice-dp"`` or ``"auto"`` (enumerate
    when within budget).  The lattice-DP state lattice has spacing
    ``delta * C / K_ctrl``, on which every lattice move lands exactly.
    """
    if path.grid != spec.horizon:
        raise ConfigurationError("path grid differs from the problem horizon")
    steps = spec.horizon.N - t_index
    if steps < 1:
        raise ConfigurationError(f"t_index={t_index} leaves no steps")
    if max_steps is not None and steps > max_steps:
        raise ConfigurationError(f"{steps} steps from t_index={t_index} exceed max_steps={max_steps}")
    if mode not in ("auto", "enumerate", "lattice-dp"):
        raise ConfigurationError(f"unknown oracle mode {mode!r}")
    x = np.asarray(x, dtype=float).reshape(spec.dim)
    C = spec.control_bound
    lattice = control_lattice(spec.dim, C, K_ctrl)
    count = float(2 * K_ctrl + 1) ** (spec.dim * steps)
    if mode == "auto":
        mode = "enumerate" if count <= max_enumeration else "lattice-dp"
    if mode == "enumerate":
        if count > max_enumeration:
            raise BudgetExceededError(
                f"enumeration needs (2*{K_ctrl}+1)^({spec.dim}*{steps}) = {count:.3g} sequences, "
                f"budget is {max_enumeration:.3g}; use mode='lattice-dp' or raise max_enumeration")
        val, seq = _enumerate(spec, path, t_index, x, steps, lattice)
        ctrl = ControlPath(path.grid, seq, C, t_index)
        return OracleResult(val, "enumerate", K_ctrl, C, steps, ctrl)
    unit = path.grid.delta * C / K_ctrl
    offsets = _round_toward_origin(lattice * path.grid.delta / unit)
    val = lattice_dp(spec, path, t_index, x, steps, lattice, offsets, unit, spec.terminal.value)
    return OracleResult(val, "lattice-dp", K_ctrl, C, steps)


@dataclass(frozen=True, eq=False)
class DescentResult:
    control: ControlPath
    cost: float
    history: tuple
    iterations: int


def descent_refine(spec: ProblemSpec, path: BrownianPath, t_index: int, x, init: ControlPath,
                   tol: float = 1e-8, max_iter: int = 500) -> DescentResult:
    """Projected gradient descent with backtracking (halving from step 1.0).

    The search direction is the adjoint gradient divided by the step length
    (the function-space gradient), so the unit step is well scaled.
    """
    C = spec.control_bound

    def project(u):
        n = np.sqrt(np.sum(u * u, axis=1, keepdims=True))
        return u * np.minimum(1.0, C / np.maximum(n, 1e-300))

    def cost_of(u):
        ctrl = ControlPath(path.grid, u, C, t_index)
        st = simulate_state(spec, path, ctrl, t_index, x)
        return evaluate_cost(spec, st, ctrl), st, ctrl

    u = project(np.array(init.values))
    J, st, ctrl = cost_of(u)
    history = [J]
    it = 0
    while it < max_iter:
        it += 1
        g = adjoint_gradient(spec, st, ctrl) / path.grid.delta
        step, moved = 1.0, None
        while step > 1e-20:
            cand = project(u - step * g)
            Jc, stc, ctrlc = cost_of(cand)
            if Jc <= J - 1e-4 * float(np.sum(g * (u - cand))) * path.grid.delta and Jc <= J:
                moved = cand
                break
            step *= 0.5
        if moved is None:
            break
        change = float(np.max(np.abs(moved - u)))
        u, J, st, ctrl = moved, Jc, stc, ctrlc
        history.append(J)
        if change < tol:
            break
    return DescentResult(ctrl, J, tuple(history), it)


def directed_min(spec: ProblemSpec, path: BrownianPath, t_index: int, x,
                 a: ControlPath, b: ControlPath) -> tuple[ControlPath, float]:
    """Control attaining the smaller of two costs on this path, with that cost.

    On a single path the selecting event is either everything or nothing, so
    the piecewise-selected control is whichever of the two is cheaper.
    """
    ja = evaluate_cost(spec, simulate_state(spec, path, a, t_index, x), a)
    jb = evaluate_cost(spec, simulate_state(spec, path, b, t_index, x), b)
    chosen = a if ja <= jb else b
    return chosen, evaluate_cost(spec, simulate_state(spec, path, chosen, t_index, x), chosen)
