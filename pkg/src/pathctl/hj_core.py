"""Backward semi-Lagrangian (Hopf-Lax) solvers for first-order and viscous HJ equations.

One backward step computes, at every node y,

    w(s_k, y) = min_u  delta * (L(u) + pot(s_k, y)) + I[w(s_{k+1})](y + delta*u)

where ``I`` is the multilinear interpolant (with the field's boundary mode).
The minimum is taken over the control lattice; for the quadratic Lagrangian it
is additionally taken exactly over the continuous box ``|u_i| <= C/sqrt(dim)``
(the whole ball when dim = 1), by minimizing the convex quadratic plus the
piecewise (bi)linear interpolant cell by cell.  The smaller value wins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .fields import ScalarField, SpaceGrid, interp_array, laplacian_array
from .problem import CatalogEntry, ProblemSpec, lagrangian_value
from .randomness import TimeGrid


@dataclass(frozen=True, eq=False)
class TimeDependentPotential:
    """``V(y + shift_k)`` at time node k; the shift table has one row per node."""

    entry: CatalogEntry
    shifts: np.ndarray
    grid: TimeGrid

    def __post_init__(self):
        shifts = np.array(self.shifts, dtype=float, copy=True)
        if shifts.ndim == 1:
            shifts = shifts[:, None]
        if shifts.shape[0] != self.grid.N + 1:
            raise ConfigurationError(
                f"shift table has {shifts.shape[0]} rows, time grid has {self.grid.N + 1} nodes")
        shifts.setflags(write=False)
        object.__setattr__(self, "shifts", shifts)

    @classmethod
    def static(cls, entry: CatalogEntry, grid: TimeGrid, dim: int) -> "TimeDependentPotential":
        return cls(entry, np.zeros((grid.N + 1, dim)), grid)

    def value(self, k: int, y) -> np.ndarray:
        return self.entry.value(np.asarray(y, dtype=float) + self.shifts[k])

    def gradient(self, k: int, y) -> np.ndarray:
        return self.entry.gradient(np.asarray(y, dtype=float) + self.shifts[k])


@dataclass(frozen=True, eq=False)
class ValueSequence:
    """One scalar field per time node, stored as an array ``(N+1,) + space.shape``."""

    grid: TimeGrid
    space: SpaceGrid
    values: np.ndarray
    method: str
    boundary_mode: str = "linear"

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        expected = (self.grid.N + 1,) + self.space.shape
        if vals.shape != expected:
            raise ConfigurationError(f"value sequence has shape {vals.shape}, expected {expected}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def field(self, k: int) -> ScalarField:
        return ScalarField(self.space, self.values[k], self.boundary_mode)

    def __len__(self):
        return self.grid.N + 1


class _AxisPieces:
    """Pieces of the 1-D interpolant along one axis.

    Piece q covers ``[lo[q], hi[q]]``; there the interpolant is affine in the
    local coordinate ``theta = scale[q] * (z - base[q]) / h`` between node
    indices ``ia[q]`` and ``ib[q]``.  Clamp mode adds flat pieces at both ends.
    """

    def __init__(self, grid: SpaceGrid, mode: str):
        M, x = grid.M, grid.axis
        cells = np.arange(M - 1)
        lo, hi = x[:-1].copy(), x[1:].copy()
        ia, ib, base, scale = cells, cells + 1, x[:-1].copy(), np.ones(M - 1)
        if mode == "linear":
            lo[0], hi[-1] = -np.inf, np.inf
            self.first_cell = 0
        else:
            lo = np.concatenate([[-np.inf], lo, [x[-1]]])
            hi = np.concatenate([[x[0]], hi, [np.inf]])
            ia = np.concatenate([[0], ia, [M - 1]])
            ib = np.concatenate([[0], ib, [M - 1]])
            base = np.concatenate([[x[0]], base, [x[-1]]])
            scale = np.concatenate([[0.0], scale, [0.0]])
            self.first_cell = 1
        self.lo, self.hi, self.ia, self.ib, self.base, self.scale = lo, hi, ia, ib, base, scale
        self.count = lo.size
        # piece holding node i (node i is the left end of cell i)
        self.home = np.minimum(np.arange(M), M - 2) + self.first_cell


class HopfLaxStep:
    """Reusable backward step operator for fixed grid, delta, C, L and lattice."""

    def __init__(self, space: SpaceGrid, delta: float, C: float, lagrangian: str = "quadratic",
                 lattice: np.ndarray | None = None, mode: str = "linear"):
        if lattice is not None and lattice.shape[0] == 0:
            raise ConfigurationError("control lattice is empty")
        if lattice is None and lagrangian != "quadratic":
            raise ConfigurationError("non-quadratic Lagrangians need a control lattice")
        self.space, self.delta, self.C = space, float(delta), float(C)
        self.lagrangian, self.mode = lagrangian, mode
        self.lattice = lattice
        if lattice is not None:
            self.lattice_cost = self.delta * lagrangian_value(lagrangian, lattice)
        self.exact = lagrangian == "quadratic"
        self.half_width = self.C / math.sqrt(space.dim)
        self.pieces = _AxisPieces(space, mode)
        self._points = space.points

    # -- public -----------------------------------------------------------
    def __call__(self, w_next: np.ndarray, pot: np.ndarray | float = 0.0) -> np.ndarray:
        G = self._lipschitz(w_next)
        best = None
        if self.exact:
            best = self._exact_1d(w_next, G) if self.space.dim == 1 else self._exact_2d(w_next, G)
        if self.lattice is not None and not (self.exact and self._lattice_dominated(G)):
            lat = self._lattice_min(w_next)
            best = lat if best is None else np.minimum(best, lat)
        return best + self.delta * pot

    # -- helpers ----------------------------------------------------------
    def _lipschitz(self, w: np.ndarray) -> float:
        """Lipschitz bound of the interpolant over the grid plus one extrapolated cell."""
        h = self.space.h
        if self.space.dim == 1:
            return float(np.max(np.abs(np.diff(w)))) / h
        gx = float(np.max(np.abs(np.diff(w, axis=0)))) / h
        gy = float(np.max(np.abs(np.diff(w, axis=1)))) / h
        twist = float(np.max(np.abs(np.diff(np.diff(w, axis=0), axis=1)))) / h if self.mode == "linear" else 0.0
        return math.hypot(gx, gy) + twist

    def _lattice_dominated(self, G: float) -> bool:
        # |u| > 2G cannot beat u = 0; smaller lattice controls sit inside the exact box
        return 2.0 * G <= self.half_width

    def _reach_cells(self, G: float) -> int:
        # a minimizer z obeys (z - y)/delta in -subgradient, so |z - y| <= delta*G
        reach = min(self.delta * self.half_width, self.delta * G * (1.0 + 1e-9))
        return max(1, int(math.ceil(reach / self.space.h)))

    def _lattice_min(self, w: np.ndarray) -> np.ndarray:
        best = np.full(self.space.shape, np.inf)
        pts = self._points
        for u, cost in zip(self.lattice, self.lattice_cost):
            vals, _ = interp_array(self.space, w, pts + self.delta * u, self.mode)
            np.minimum(best, vals + cost, out=best)
        return best

    def _exact_1d(self, w: np.ndarray, G: float) -> np.ndarray:
        P, h, d = self.pieces, self.space.h, self.delta
        y = self.space.axis
        r = self._reach_cells(G)
        zl, zr = y - d * self.half_width, y + d * self.half_width
        best = np.full(y.shape, np.inf)
        for off in range(-r, r + 1):
            q = np.clip(P.home + off, 0, P.count - 1)
            lo = np.maximum(P.lo[q], zl)
            hi = np.minimum(P.hi[q], zr)
            ok = lo <= hi
            g = P.scale[q] / h
            wa, wb = w[P.ia[q]], w[P.ib[q]]
            slope = g * (wb - wa)
            z = np.clip(y - d * slope, lo, hi)
            val = (z - y) ** 2 / (2.0 * d) + wa + slope * (z - P.base[q])
            np.minimum(best, np.where(ok, val, np.inf), out=best)
        return best

    def _exact_2d(self, w: np.ndarray, G: float) -> np.ndarray:
        P, h, d = self.pieces, self.space.h, self.delta
        M = self.space.M
        y1 = self.space.axis[:, None] * np.ones((1, M))
        y2 = self.space.axis[None, :] * np.ones((M, 1))
        r = self._reach_cells(G)
        hw = d * self.half_width
        best = np.full((M, M), np.inf)
        inv = 1.0 / d
        for o1 in range(-r, r + 1):
            q1 = np.clip(P.home + o1, 0, P.count - 1)[:, None] * np.ones((1, M), dtype=np.intp)
            for o2 in range(-r, r + 1):
                q2 = np.clip(P.home + o2, 0, P.count - 1)[None, :] * np.ones((M, 1), dtype=np.intp)
                lo1 = np.maximum(P.lo[q1], y1 - hw)
                hi1 = np.minimum(P.hi[q1], y1 + hw)
                lo2 = np.maximum(P.lo[q2], y2 - hw)
                hi2 = np.minimum(P.hi[q2], y2 + hw)
                ok = (lo1 <= hi1) & (lo2 <= hi2)
                a1, b1, a2, b2 = P.ia[q1], P.ib[q1], P.ia[q2], P.ib[q2]
                w00, w10, w01, w11 = w[a1, a2], w[b1, a2], w[a1, b2], w[b1, b2]
                g1, g2 = P.scale[q1] / h, P.scale[q2] / h
                x1, x2 = P.base[q1], P.base[q2]
                c1, c2, c12 = w10 - w00, w01 - w00, w11 - w10 - w01 + w00
                e = g1 * g2 * c12

                def F(z1, z2):
                    t1, t2 = g1 * (z1 - x1), g2 * (z2 - x2)
                    quad = ((z1 - y1) ** 2 + (z2 - y2) ** 2) * (0.5 * inv)
                    return quad + w00 + c1 * t1 + c2 * t2 + c12 * t1 * t2

                cand = np.full((M, M), np.inf)
                # edges: the objective restricted to a coordinate line is a convex parabola
                for fixed2 in (lo2, hi2):
                    z1 = np.clip(y1 - d * (g1 * c1 + e * (fixed2 - x2)), lo1, hi1)
                    np.minimum(cand, F(z1, fixed2), out=cand)
                for fixed1 in (lo1, hi1):
                    z2 = np.clip(y2 - d * (g2 * c2 + e * (fixed1 - x1)), lo2, hi2)
                    np.minimum(cand, F(fixed1, z2), out=cand)
                # interior stationary point when the Hessian is positive definite
                det = inv * inv - e * e
                pd = det > 0
                sdet = np.where(pd, det, 1.0)
                r1 = y1 * inv - g1 * c1 + e * x2
                r2 = y2 * inv - g2 * c2 + e * x1
                s1 = (inv * r1 - e * r2) / sdet
                s2 = (inv * r2 - e * r1) / sdet
                inside = pd & (s1 >= lo1) & (s1 <= hi1) & (s2 >= lo2) & (s2 <= hi2)
                if np.any(inside):
                    np.minimum(cand, np.where(inside, F(np.where(inside, s1, y1), np.where(inside, s2, y2)), np.inf),
                               out=cand)
                np.minimum(best, np.where(ok, cand, np.inf), out=best)
        return best


def _stepper(spec: ProblemSpec, space: SpaceGrid, delta: float) -> HopfLaxStep:
    lattice = spec.lattice()
    return HopfLaxStep(space, delta, spec.control_bound, spec.lagrangian, lattice, spec.boundary_mode)


def solve_hj_backward(spec: ProblemSpec, pot: TimeDependentPotential, terminal: ScalarField) -> ValueSequence:
    """First-order HJ equation backward from ``terminal`` with a time-dependent potential."""
    grid = spec.horizon
    if pot.grid != grid:
        raise ConfigurationError("potential time grid differs from the problem horizon")
    space = terminal.grid
    step = _stepper(spec, space, grid.delta)
    pts = space.points
    out = np.empty((grid.N + 1,) + space.shape)
    out[grid.N] = terminal.values
    for k in range(grid.N - 1, -1, -1):
        out[k] = step(out[k + 1], pot.value(k, pts))
    return ValueSequence(grid, space, out, "hopf-lax", terminal.boundary_mode)


def solve_viscous_hjb(spec: ProblemSpec, terminal: ScalarField) -> ValueSequence:
    """Deterministic viscous HJB baseline: Hopf-Lax stage then explicit diffusion per step."""
    grid, space = spec.horizon, terminal.grid
    ratio = spec.nu * grid.delta / space.h ** 2
    if ratio > 0.5:
        raise ConfigurationError(
            f"explicit diffusion is unstable: nu*delta/h^2 = {ratio:.4g} exceeds 1/2 "
            f"(nu={spec.nu}, delta={grid.delta:.4g}, h={space.h:.4g})")
    step = _stepper(spec, space, grid.delta)
    V = spec.potential.value(space.points)
    out = np.empty((grid.N + 1,) + space.shape)
    out[grid.N] = terminal.values
    for k in range(grid.N - 1, -1, -1):
        stage = step(out[k + 1], V)
        out[k] = stage + 0.5 * spec.nu * grid.delta * laplacian_array(space, stage)
    return ValueSequence(grid, space, out, "viscous", terminal.boundary_mode)
