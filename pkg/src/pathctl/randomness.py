"""Seeded Brownian paths on uniform time grids, with Brownian-bridge refinement.

Sampling contract (part of the reproducibility guarantee): level ``l`` of a
path with base seed ``s`` draws its standard normals from
``numpy.random.Generator(PCG64(SeedSequence([s, l])))`` via
``Generator.standard_normal`` (ziggurat), consumed in node order.  Level 0
supplies the increments of the base grid; level ``l >= 1`` supplies the
midpoints inserted by the ``l``-th refinement, the draw at position ``k``
belonging to coarse step ``k``.  Any level can therefore be rebuilt from
``(seed, level)`` alone.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class TimeGrid:
    t0: float
    T: float
    N: int

    def __post_init__(self):
        if not np.isfinite(self.t0) or not np.isfinite(self.T) or self.t0 >= self.T:
            raise ConfigurationError(f"time grid needs t0 < T, got t0={self.t0}, T={self.T}")
        if int(self.N) != self.N or self.N < 1:
            raise ConfigurationError(f"time grid needs N >= 1, got N={self.N}")
        object.__setattr__(self, "N", int(self.N))

    @property
    def delta(self) -> float:
        return (self.T - self.t0) / self.N

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.delta * np.arange(self.N + 1)

    def node(self, k: int) -> float:
        return self.t0 + k * self.delta

    def refined(self) -> "TimeGrid":
        return TimeGrid(self.t0, self.T, 2 * self.N)


def _level_rng(seed: int, level: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(level)])))


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """A Brownian trajectory stored at the nodes of ``grid`` only.

    ``values[k]`` is W at node k relative to node 0 (so ``values[0] == 0``).
    """

    grid: TimeGrid
    dim: int
    values: np.ndarray
    seed: int | None = None
    level: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=float, copy=True)
        if vals.ndim == 1:
            vals = vals[:, None]
        if vals.shape != (self.grid.N + 1, self.dim):
            raise ConfigurationError(
                f"path values have shape {vals.shape}, expected {(self.grid.N + 1, self.dim)}"
            )
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=0)

    def at(self, k: int) -> np.ndarray:
        return self.values[k]

    @property
    def identifier(self) -> str:
        return f"seed={self.seed}/level={self.level}/N={self.grid.N}"


def generate_path(seed: int, grid: TimeGrid, dim: int) -> BrownianPath:
    if dim not in (1, 2):
        raise ConfigurationError(f"dim must be 1 or 2, got {dim}")
    if not isinstance(grid, TimeGrid):
        raise ConfigurationError("grid must be a TimeGrid")
    rng = _level_rng(seed, 0)
    steps = rng.standard_normal((grid.N, dim)) * np.sqrt(grid.delta)
    values = np.zeros((grid.N + 1, dim))
    np.cumsum(steps, axis=0, out=values[1:])
    return BrownianPath(grid, dim, values, seed=int(seed), level=0)


def refine_path(path: BrownianPath) -> BrownianPath:
    """Halve the step by inserting Brownian-bridge midpoints.

    Coarse nodes are kept exactly; the midpoint of step k is the node average
    plus ``sqrt(delta/4)`` times draw k of the level stream.
    """
    if path.seed is None:
        raise ConfigurationError("refinement needs the path seed (path was loaded without one)")
    level = path.level + 1
    delta = path.grid.delta
    xi = _level_rng(path.seed, level).standard_normal((path.grid.N, path.dim))
    w = path.values
    mid = 0.5 * (w[:-1] + w[1:]) + np.sqrt(delta / 4.0) * xi
    fine = np.empty((2 * path.grid.N + 1, path.dim))
    fine[0::2] = w
    fine[1::2] = mid
    return BrownianPath(path.grid.refined(), path.dim, fine, seed=path.seed, level=level)


def path_at_level(seed: int, grid: TimeGrid, dim: int, level: int) -> BrownianPath:
    """Base path refined ``level`` times (grid is the level-0 grid)."""
    path = generate_path(seed, grid, dim)
    for _ in range(level):
        path = refine_path(path)
    return path


def dump_path_csv(path: BrownianPath, target) -> None:
    header = ["k", "t"] + [f"w_{i + 1}" for i in range(path.dim)]
    with open(target, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for k, t in enumerate(path.grid.nodes):
            writer.writerow([k, repr(float(t))] + [repr(float(v)) for v in path.values[k]])


def load_path_csv(source, seed: int | None = None, level: int = 0) -> BrownianPath:
    with open(source, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    dim = len(header) - 2
    if header[:2] != ["k", "t"] or dim not in (1, 2):
        raise ConfigurationError(f"{Path(source).name}: unexpected header {header}")
    t = np.array([float(r[1]) for r in body])
    values = np.array([[float(v) for v in r[2:]] for r in body])
    grid = TimeGrid(float(t[0]), float(t[-1]), len(body) - 1)
    return BrownianPath(grid, dim, values, seed=seed, level=level)
