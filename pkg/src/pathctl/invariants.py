"""Midpoint Stratonovich sums, variational symmetries and their conserved quantities."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .drift_dynamics import DriftField
from .errors import ConfigurationError
from .oracle import StatePath
from .problem import ProblemSpec
from .randomness import BrownianPath, TimeGrid


def strat_partial_sums(samples, path: BrownianPath, start: int = 0, stop: int | None = None) -> np.ndarray:
    """Running midpoint sums; entry ``j`` covers steps ``start .. start+j-1``.

    ``samples`` holds the integrand at nodes ``start .. stop``.
    """
    stop = path.grid.N if stop is None else stop
    if not 0 <= start <= stop <= path.grid.N:
        raise ConfigurationError(f"range [{start}, {stop}] is outside the path grid")
    a = np.asarray(samples, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape != (stop - start + 1, path.dim):
        raise ConfigurationError(f"samples have shape {a.shape}, expected {(stop - start + 1, path.dim)}")
    dW = np.diff(path.values[start:stop + 1], axis=0)
    terms = np.sum(0.5 * (a[:-1] + a[1:]) * dW, axis=1)
    out = np.zeros(stop - start + 1)
    np.cumsum(terms, out=out[1:])
    return out


def strat_integral(samples, path: BrownianPath, start: int = 0, stop: int | None = None) -> float:
    """Midpoint sum of ``samples`` against the path increments over ``[start, stop]``."""
    return float(strat_partial_sums(samples, path, start, stop)[-1])


@dataclass(frozen=True, eq=False)
class SymmetryField:
    """Infinitesimal variation: time part ``T(s)``, space part ``X(s, x)`` with derivatives.

    Space callables take ``(s, x)`` with ``x`` of shape ``(n, dim)``; ``X_jac``
    returns ``(n, dim, dim)`` with ``[..., j, i] = d X_j / d x_i`` and
    ``X_lap`` the component-wise Laplacian ``(n, dim)``.
    """

    identifier: str
    dim: int
    T_fn: Callable
    T_dot: Callable
    X_fn: Callable
    X_t: Callable
    X_jac: Callable
    X_lap: Callable
    generator: np.ndarray | None = None

    @classmethod
    def time_translation(cls, dim: int) -> "SymmetryField":
        zero = lambda s, x: np.zeros_like(np.asarray(x, dtype=float))
        return cls("time_translation", dim, lambda s: 1.0, lambda s: 0.0, zero, zero,
                   lambda s, x: np.zeros(np.shape(x) + (dim,)), zero)

    @classmethod
    def rotation(cls, A) -> "SymmetryField":
        A = np.array(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ConfigurationError("rotation generator must be a square matrix")
        if not np.allclose(A, -A.T, atol=1e-14, rtol=0.0):
            raise ConfigurationError("rotation generator must be antisymmetric")
        A.setflags(write=False)
        zero = lambda s, x: np.zeros_like(np.asarray(x, dtype=float))
        return cls("rotation", A.shape[0], lambda s: 0.0, lambda s: 0.0,
                   lambda s, x: np.asarray(x, dtype=float) @ A.T, zero,
                   lambda s, x: np.broadcast_to(A, np.shape(x)[:-1] + A.shape), zero, A)

    @classmethod
    def custom(cls, dim: int, T_fn, T_dot, X_fn, X_t, X_jac, X_lap) -> "SymmetryField":
        return cls("custom", dim, T_fn, T_dot, X_fn, X_t, X_jac, X_lap)


@dataclass(frozen=True, eq=False)
class QuantityTrace:
    grid: TimeGrid
    start: int
    Q: np.ndarray
    noise: np.ndarray
    residual: np.ndarray

    def __post_init__(self):
        if not (len(self.Q) == len(self.noise) == len(self.residual) == self.grid.N - self.start + 1):
            raise ConfigurationError("trace series lengths disagree")

    @property
    def times(self) -> np.ndarray:
        return self.grid.nodes[self.start:]

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residual)))

    def dump_csv(self, target) -> None:
        with open(target, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["k", "t", "Q", "noise_integral", "residual"])
            for j, t in enumerate(self.times):
                w.writerow([self.start + j, repr(float(t)), repr(float(self.Q[j])),
                            repr(float(self.noise[j])), repr(float(self.residual[j]))])


def _drift_along(drift: DriftField, state: StatePath) -> np.ndarray:
    Z = state.values
    return np.stack([drift.at(state.start + j, Z[j][None, :])[0][0] for j in range(Z.shape[0])])


def conserved_quantity(sym: SymmetryField, drift: DriftField, state: StatePath, spec: ProblemSpec,
                       path: BrownianPath) -> QuantityTrace:
    """Quantity trace along ``state`` with its midpoint-compensated residual.

    The noise coefficient is ``sqrt(nu) (J_X^T u + T grad V)``: the drift's
    own dependence on the state cancels against its transport noise.  The
    residual removes the midpoint noise sum and the correction
    ``-(nu/2) <Lap X, u>`` that separates the midpoint and forward-point
    bounded-variation parts.
    """
    if sym.dim != spec.dim:
        raise ConfigurationError(f"symmetry has dim {sym.dim}, problem has dim {spec.dim}")
    Z = state.values
    s = state.times
    u = _drift_along(drift, state)
    T = np.array([sym.T_fn(t) for t in s], dtype=float)
    X = np.stack([sym.X_fn(t, z[None, :])[0] for t, z in zip(s, Z)])
    J = np.stack([sym.X_jac(t, z[None, :])[0] for t, z in zip(s, Z)])
    lapX = np.stack([sym.X_lap(t, z[None, :])[0] for t, z in zip(s, Z)])
    V = spec.potential.value(Z)
    gV = spec.potential.gradient(Z)
    Q = np.sum(X * u, axis=1) - T * (0.5 * np.sum(u * u, axis=1) - V)
    coef = np.sqrt(spec.nu) * (np.einsum("kji,kj->ki", J, u) + T[:, None] * gV)
    N = strat_partial_sums(coef, path, state.start, path.grid.N)
    corr = 0.5 * spec.nu * path.grid.delta * np.sum(lapX * u, axis=1)[:-1]
    acc = np.zeros_like(Q)
    np.cumsum(corr, out=acc[1:])
    R = Q - Q[0] - N + acc
    return QuantityTrace(path.grid, state.start, Q, N, R)


def symmetry_residual(sym: SymmetryField, drift: DriftField, state: StatePath, spec: ProblemSpec,
                      guard: float = 0.1) -> float:
    """Max over path nodes with ``|Z| > guard`` of the variational symmetry condition."""
    Z = state.values
    s = state.times
    u = _drift_along(drift, state)
    keep = np.sqrt(np.sum(Z * Z, axis=1)) > guard
    if not np.any(keep):
        return 0.0
    worst = 0.0
    for t, z, v in zip(s[keep], Z[keep], u[keep]):
        zz = z[None, :]
        X = sym.X_fn(t, zz)[0]
        DX = sym.X_t(t, zz)[0] + sym.X_jac(t, zz)[0] @ v + 0.5 * spec.nu * sym.X_lap(t, zz)[0]
        Vz = float(spec.potential.value(zz)[0])
        gV = spec.potential.gradient(zz)[0]
        r = float(v @ DX - (0.5 * v @ v - Vz) * sym.T_dot(t) + gV @ X)
        worst = max(worst, abs(r))
    return worst
