"""Uniform spatial grids, scalar/vector fields, finite differences and interpolation.

Fields are immutable.  Interpolation is multilinear; outside the grid a field
either clamps the query point onto the grid (``"clamp"``) or extends the
boundary cell's multilinear formula (``"linear"``, linear extrapolation).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError

BOUNDARY_MODES = ("clamp", "linear")


@dataclass(frozen=True)
class SpaceGrid:
    """Square grid ``[lower, upper]^dim`` with ``M`` nodes per axis."""

    dim: int
    lower: float
    upper: float
    M: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"space grid dim must be 1 or 2, got {self.dim}")
        if not self.lower < self.upper:
            raise ConfigurationError(f"space grid needs lower < upper, got {self.lower}, {self.upper}")
        if int(self.M) != self.M or self.M < 3:
            raise ConfigurationError(f"space grid needs M >= 3, got {self.M}")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "lower", float(self.lower))
        object.__setattr__(self, "upper", float(self.upper))

    @property
    def h(self) -> float:
        return (self.upper - self.lower) / (self.M - 1)

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.M,) * self.dim

    @property
    def axis(self) -> np.ndarray:
        return self.lower + self.h * np.arange(self.M)

    @property
    def points(self) -> np.ndarray:
        """Node coordinates, shape ``shape + (dim,)``."""
        axes = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        return np.stack(axes, axis=-1)

    def refined(self) -> "SpaceGrid":
        return SpaceGrid(self.dim, self.lower, self.upper, 2 * (self.M - 1) + 1)

    def core_slices(self, fraction: float = 0.5) -> tuple[slice, ...]:
        """Index window covering the central ``fraction`` of every axis."""
        if not 0.0 < fraction <= 1.0:
            raise ConfigurationError(f"core fraction must lie in (0, 1], got {fraction}")
        half = 0.5 * fraction * (self.upper - self.lower)
        mid = 0.5 * (self.upper + self.lower)
        ax = self.axis
        tol = 1e-9 * self.h
        idx = np.nonzero((ax >= mid - half - tol) & (ax <= mid + half + tol))[0]
        return (slice(int(idx[0]), int(idx[-1]) + 1),) * self.dim

    def core_mask(self, fraction: float = 0.5) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        mask[self.core_slices(fraction)] = True
        return mask

    def describe(self) -> dict:
        return {"dim": self.dim, "lower": self.lower, "upper": self.upper, "M": self.M, "h": self.h}


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ScalarField:
    grid: SpaceGrid
    values: np.ndarray
    boundary_mode: str = "linear"

    def __post_init__(self):
        vals = _frozen(self.values)
        if vals.shape != self.grid.shape:
            raise ConfigurationError(f"field values have shape {vals.shape}, expected {self.grid.shape}")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("field values must be finite")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ConfigurationError(f"unknown boundary mode {self.boundary_mode!r}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def from_function(cls, grid: SpaceGrid, fn, boundary_mode: str = "linear") -> "ScalarField":
        """``fn`` maps an array of points ``(..., dim)`` to values ``(...)``."""
        return cls(grid, fn(grid.points), boundary_mode)

    def with_values(self, values) -> "ScalarField":
        return ScalarField(self.grid, values, self.boundary_mode)


@dataclass(frozen=True, eq=False)
class VectorField:
    grid: SpaceGrid
    values: np.ndarray
    boundary_mode: str = "linear"

    def __post_init__(self):
        vals = _frozen(self.values)
        expected = self.grid.shape + (self.grid.dim,)
        if vals.shape != expected:
            raise ConfigurationError(f"vector field has shape {vals.shape}, expected {expected}")
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("field values must be finite")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ConfigurationError(f"unknown boundary mode {self.boundary_mode!r}")
        object.__setattr__(self, "values", vals)

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[..., i], self.boundary_mode)


def locate(grid: SpaceGrid, pts: np.ndarray, mode: str):
    """Cell indices and local coordinates of ``pts`` (shape ``(..., dim)``).

    Returns ``(idx, theta, outside)``: integer cell index per axis in
    ``[0, M-2]``, local coordinate per axis (in ``[0, 1]`` inside the grid,
    unbounded for ``"linear"`` extrapolation) and a boolean outside-mask.
    """
    pts = np.asarray(pts, dtype=float)
    h = grid.h
    outside = np.any((pts < grid.lower) | (pts > grid.upper), axis=-1)
    if mode == "clamp":
        pts = np.clip(pts, grid.lower, grid.upper)
    s = (pts - grid.lower) / h
    idx = np.clip(np.floor(s), 0, grid.M - 2).astype(np.intp)
    theta = s - idx
    return idx, theta, outside


def interp_array(grid: SpaceGrid, values: np.ndarray, pts: np.ndarray, mode: str = "linear"):
    """Multilinear interpolation of node ``values`` at ``pts``.

    ``values`` has shape ``grid.shape`` optionally followed by component axes;
    the result has shape ``pts.shape[:-1]`` followed by the same component axes.
    Returns ``(result, n_outside)``.
    """
    idx, theta, outside = locate(grid, pts, mode)
    extra = values.ndim - grid.dim
    if grid.dim == 1:
        i, t = idx[..., 0], theta[..., 0]
        if extra:
            t = t.reshape(t.shape + (1,) * extra)
        out = (1.0 - t) * values[i] + t * values[i + 1]
    else:
        i, j = idx[..., 0], idx[..., 1]
        t, u = theta[..., 0], theta[..., 1]
        if extra:
            t = t.reshape(t.shape + (1,) * extra)
            u = u.reshape(u.shape + (1,) * extra)
        out = ((1.0 - t) * (1.0 - u) * values[i, j] + t * (1.0 - u) * values[i + 1, j]
               + (1.0 - t) * u * values[i, j + 1] + t * u * values[i + 1, j + 1])
    return out, int(np.count_nonzero(outside))


def interpolate(f: ScalarField, x, diagnostics: dict | None = None) -> float:
    """Value of ``f`` at the point ``x`` (multilinear; exact at nodes and on affine data).

    With a ``diagnostics`` dict, queries outside the grid increment
    ``diagnostics["outside"]``.
    """
    pt = np.asarray(x, dtype=float).reshape(1, f.grid.dim)
    val, n_out = interp_array(f.grid, f.values, pt, f.boundary_mode)
    if diagnostics is not None and n_out:
        diagnostics["outside"] = diagnostics.get("outside", 0) + n_out
    return float(val[0])


def shift_sample(f: ScalarField, d) -> ScalarField:
    """Field whose node x holds ``interpolate(f, x + d)``."""
    d = np.asarray(d, dtype=float).reshape(f.grid.dim)
    if not np.any(d):
        return f
    vals, _ = interp_array(f.grid, f.values, f.grid.points + d, f.boundary_mode)
    return ScalarField(f.grid, vals, f.boundary_mode)


def shift_sample_vector(f: VectorField, d) -> VectorField:
    d = np.asarray(d, dtype=float).reshape(f.grid.dim)
    if not np.any(d):
        return f
    vals, _ = interp_array(f.grid, f.values, f.grid.points + d, f.boundary_mode)
    return VectorField(f.grid, vals, f.boundary_mode)


def gradient_array(grid: SpaceGrid, values: np.ndarray) -> np.ndarray:
    """Central differences inside, first-order one-sided at the boundary."""
    if grid.dim == 1:
        return np.gradient(values, grid.h, axis=0, edge_order=1)[..., None]
    gx, gy = np.gradient(values, grid.h, axis=(0, 1), edge_order=1)
    return np.stack([gx, gy], axis=-1)


def gradient(f: ScalarField) -> VectorField:
    return VectorField(f.grid, gradient_array(f.grid, f.values), f.boundary_mode)


def laplacian_array(grid: SpaceGrid, values: np.ndarray) -> np.ndarray:
    h2 = grid.h ** 2
    v = values
    if grid.dim == 1:
        inner = (v[2:] - 2.0 * v[1:-1] + v[:-2]) / h2
    else:
        inner = (v[2:, 1:-1] + v[:-2, 1:-1] + v[1:-1, 2:] + v[1:-1, :-2] - 4.0 * v[1:-1, 1:-1]) / h2
    return np.pad(inner, 1, mode="edge")


def laplacian(f: ScalarField) -> ScalarField:
    """Three/five-point stencil; boundary nodes copy the nearest interior value."""
    return ScalarField(f.grid, laplacian_array(f.grid, f.values), f.boundary_mode)


def dump_field_csv(f: ScalarField, target) -> None:
    g = f.grid
    with open(target, "w", newline="") as fh:
        fh.write(f"# dim={g.dim} lower={g.lower!r} upper={g.upper!r} M={g.M} boundary={f.boundary_mode}\n")
        writer = csv.writer(fh, lineterminator="\n")
        coords = ["x", "y"][: g.dim]
        writer.writerow(coords + ["value"])
        pts = g.points.reshape(-1, g.dim)
        for p, v in zip(pts, f.values.reshape(-1)):
            writer.writerow([repr(float(c)) for c in p] + [repr(float(v))])


def load_field_csv(source) -> ScalarField:
    with open(source, newline="") as fh:
        meta_line = fh.readline()
        meta = dict(item.split("=", 1) for item in meta_line.lstrip("#").split())
        rows = list(csv.reader(fh))[1:]
    grid = SpaceGrid(int(meta["dim"]), float(meta["lower"]), float(meta["upper"]), int(meta["M"]))
    vals = np.array([float(r[-1]) for r in rows]).reshape(grid.shape)
    return ScalarField(grid, vals, meta["boundary"])
