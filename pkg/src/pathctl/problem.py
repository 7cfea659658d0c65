"""Control problem instances: potentials, terminal costs, Lagrangians.

Catalog entries evaluate on arrays of points with a trailing ``dim`` axis and
return the value, gradient (trailing ``dim`` axis) and Laplacian.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, ProvenanceWarning
from .fields import SpaceGrid
from .randomness import TimeGrid

CATALOG = ("zero", "constant", "linear", "cosine", "quadratic", "radial_cosine")
LAGRANGIANS = ("quadratic", "absolute", "huber")


def _vec(v, dim: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(v, dtype=float))
    if arr.size == 1 and dim > 1:
        arr = np.concatenate([arr, np.zeros(dim - 1)])
    if arr.shape != (dim,):
        raise ConfigurationError(f"{name} must have {dim} components, got {arr.tolist()}")
    return arr


@dataclass(frozen=True)
class CatalogEntry:
    """A closed-form scalar function of the state (potential or terminal cost).

    ``params`` holds the entry's parameters as a sorted tuple of pairs; every
    entry accepts an additive ``offset``.
    """

    identifier: str
    params: tuple = ()
    bounded: bool = True
    lipschitz: bool = True
    harmonic: bool = False

    def __post_init__(self):
        if self.identifier not in CATALOG:
            raise ConfigurationError(f"unknown catalog entry {self.identifier!r}; known: {', '.join(CATALOG)}")

    def param(self, name, default=None):
        return dict(self.params).get(name, default)

    @property
    def offset(self) -> float:
        return float(self.param("offset", 0.0))

    def label(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in self.params)
        return f"{self.identifier}({inner})"

    def plus(self, c: float) -> "CatalogEntry":
        """Same entry with ``c`` added to its value."""
        p = dict(self.params)
        p["offset"] = float(p.get("offset", 0.0)) + float(c)
        return make_entry(self.identifier, **p)

    # -- evaluation ------------------------------------------------------
    def value(self, x) -> np.ndarray:
        return self.evaluate(x)[0]

    def gradient(self, x) -> np.ndarray:
        return self.evaluate(x)[1]

    def laplacian(self, x) -> np.ndarray:
        return self.evaluate(x)[2]

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        dim = x.shape[-1]
        shape = x.shape[:-1]
        kind = self.identifier
        off = self.offset
        if kind == "zero":
            return np.full(shape, off), np.zeros(x.shape), np.zeros(shape)
        if kind == "constant":
            c = float(self.param("c", 0.0))
            return np.full(shape, c + off), np.zeros(x.shape), np.zeros(shape)
        if kind == "linear":
            a = _vec(self.param("a"), dim, "linear.a")
            return x @ a + off, np.broadcast_to(a, x.shape).copy(), np.zeros(shape)
        if kind == "cosine":
            kappa = float(self.param("kappa", 1.0))
            k = _vec(self.param("k", 1.0), dim, "cosine.k")
            phase = float(self.param("phase", 0.0))
            arg = x @ k + phase
            val = kappa * np.cos(arg) + off
            grad = -kappa * np.sin(arg)[..., None] * k
            lap = -kappa * (k @ k) * np.cos(arg)
            return val, grad, lap
        if kind == "quadratic":
            kappa = float(self.param("kappa", 1.0))
            return 0.5 * kappa * np.sum(x * x, axis=-1) + off, kappa * x, np.full(shape, kappa * dim)
        if kind == "radial_cosine":
            kappa = float(self.param("kappa", 1.0))
            k = float(self.param("k", 1.0))
            r = np.sqrt(np.sum(x * x, axis=-1))
            # sin(kr)/r written through sinc so the origin is regular
            sinc = k * np.sinc(k * r / np.pi)
            val = kappa * np.cos(k * r) + off
            grad = -kappa * k * sinc[..., None] * x
            lap = -kappa * k * k * np.cos(k * r) - (dim - 1) * kappa * k * sinc
            return val, grad, lap
        raise ConfigurationError(f"unknown catalog entry {kind!r}")

    def check_dim(self, dim: int) -> None:
        if self.identifier == "linear":
            _vec(self.param("a"), dim, "linear.a")
        elif self.identifier == "cosine":
            _vec(self.param("k", 1.0), dim, "cosine.k")

    def lipschitz_bound(self, dim: int, radius: float) -> float:
        """Upper bound of ``|grad|`` on the ball of the given radius."""
        kind = self.identifier
        if kind in ("zero", "constant"):
            return 0.0
        if kind == "linear":
            return float(np.linalg.norm(_vec(self.param("a"), dim, "linear.a")))
        if kind == "cosine":
            return abs(float(self.param("kappa", 1.0))) * float(
                np.linalg.norm(_vec(self.param("k", 1.0), dim, "cosine.k")))
        if kind == "quadratic":
            return abs(float(self.param("kappa", 1.0))) * radius
        if kind == "radial_cosine":
            return abs(float(self.param("kappa", 1.0)) * float(self.param("k", 1.0)))
        raise ConfigurationError(kind)


def make_entry(identifier: str, **params) -> CatalogEntry:
    """Build a catalog entry, validating its parameters.

    zero; constant(c); linear(a); cosine(kappa, k, phase) = kappa*cos(<k,x>+phase);
    quadratic(kappa) = kappa*|x|^2/2; radial_cosine(kappa, k) = kappa*cos(k|x|).
    Every entry also takes ``offset``.
    """
    allowed = {
        "zero": set(),
        "constant": {"c"},
        "linear": {"a"},
        "cosine": {"kappa", "k", "phase"},
        "quadratic": {"kappa"},
        "radial_cosine": {"kappa", "k"},
    }
    if identifier not in allowed:
        raise ConfigurationError(f"unknown catalog entry {identifier!r}; known: {', '.join(CATALOG)}")
    extra = set(params) - allowed[identifier] - {"offset"}
    if extra:
        raise ConfigurationError(f"{identifier} does not take parameter(s) {sorted(extra)}")
    if identifier == "linear" and "a" not in params:
        raise ConfigurationError("linear entry needs parameter 'a'")
    clean = {}
    for k, v in params.items():
        arr = np.atleast_1d(np.asarray(v, dtype=float))
        if not np.all(np.isfinite(arr)):
            raise ConfigurationError(f"{identifier}.{k} must be finite")
        clean[k] = tuple(float(t) for t in arr) if arr.size > 1 or k in ("a",) else float(arr[0])
    harmonic = identifier in ("zero", "constant", "linear")
    bounded = identifier not in ("linear", "quadratic")
    lipschitz = identifier != "quadratic"
    return CatalogEntry(identifier, tuple(sorted(clean.items())), bounded, lipschitz, harmonic)


def catalog_eval(entry: CatalogEntry, x):
    """``{"value", "gradient", "laplacian"}`` of ``entry`` at the point ``x``."""
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ConfigurationError("catalog evaluation needs a finite point")
    val, grad, lap = entry.evaluate(x.reshape(1, -1))
    return {"value": float(val[0]), "gradient": grad[0], "laplacian": float(lap[0])}


# -- Lagrangians -----------------------------------------------------------

def lagrangian_value(name: str, u: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.sum(u * u, axis=-1))
    if name == "quadratic":
        return 0.5 * r * r
    if name == "absolute":
        return r
    if name == "huber":
        return np.where(r <= 1.0, 0.5 * r * r, r - 0.5)
    raise ConfigurationError(f"unknown Lagrangian {name!r}; known: {', '.join(LAGRANGIANS)}")


def lagrangian_gradient(name: str, u: np.ndarray) -> np.ndarray:
    r = np.sqrt(np.sum(u * u, axis=-1, keepdims=True))
    if name == "quadratic":
        return np.array(u, dtype=float)
    safe = np.where(r > 0, r, 1.0)
    if name == "absolute":
        return np.where(r > 0, u / safe, 0.0)
    if name == "huber":
        return np.where(r <= 1.0, u, u / safe)
    raise ConfigurationError(f"unknown Lagrangian {name!r}; known: {', '.join(LAGRANGIANS)}")


def control_lattice(dim: int, C: float, K: int) -> np.ndarray:
    """Uniform ``(2K+1)^dim`` lattice on ``[-C, C]^dim`` cut to the ball ``|u| <= C``.

    Rows are ordered by increasing ``|u|`` so that first-minimum argmins break
    ties toward smaller controls.
    """
    if K < 1:
        raise ConfigurationError(f"control lattice needs K >= 1, got {K}")
    ticks = C * np.arange(-K, K + 1) / K
    pts = np.stack(np.meshgrid(*([ticks] * dim), indexing="ij"), axis=-1).reshape(-1, dim)
    norms = np.sqrt(np.sum(pts * pts, axis=1))
    keep = norms <= C * (1.0 + 1e-12)
    pts, norms = pts[keep], norms[keep]
    order = np.lexsort(tuple(pts.T[::-1]) + (np.round(norms, 12),))
    out = pts[order]
    if out.shape[0] == 0:
        raise ConfigurationError("control lattice is empty")
    return out


@dataclass(frozen=True)
class ProblemSpec:
    """One pathwise control problem: noise level, grids, V, S, L and control bound.

    ``control_bound=None`` picks ``10 * (|grad S|_inf + T |grad V|_inf)``
    estimated on the space grid (at least 1).
    """

    dim: int
    nu: float
    horizon: TimeGrid
    space: SpaceGrid
    potential: CatalogEntry = field(default_factory=lambda: make_entry("zero"))
    terminal: CatalogEntry = field(default_factory=lambda: make_entry("zero"))
    control_bound: float | None = None
    lagrangian: str = "quadratic"
    control_K: int = 20
    boundary_mode: str = "linear"

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigurationError(f"dim must be 1 or 2, got {self.dim}")
        if self.space.dim != self.dim:
            raise ConfigurationError(f"space grid has dim {self.space.dim}, problem has dim {self.dim}")
        if not (np.isfinite(self.nu) and self.nu > 0):
            raise ConfigurationError(f"nu must be positive, got {self.nu}")
        if self.lagrangian not in LAGRANGIANS:
            raise ConfigurationError(f"unknown Lagrangian {self.lagrangian!r}; known: {', '.join(LAGRANGIANS)}")
        if self.control_K < 1:
            raise ConfigurationError(f"control_K must be >= 1, got {self.control_K}")
        if self.boundary_mode not in ("clamp", "linear"):
            raise ConfigurationError(f"unknown boundary mode {self.boundary_mode!r}")
        for role, entry in (("potential", self.potential), ("terminal", self.terminal)):
            entry.check_dim(self.dim)
            if not (entry.bounded or role == "terminal") or not entry.lipschitz:
                warnings.warn(
                    f"{role} {entry.label()} violates the bounded-Lipschitz standing assumption; "
                    "admitted for closed-form comparisons only",
                    ProvenanceWarning, stacklevel=3)
        if self.control_bound is None:
            radius = float(np.sqrt(self.dim) * max(abs(self.space.lower), abs(self.space.upper)))
            T = self.horizon.T - self.horizon.t0
            est = self.terminal.lipschitz_bound(self.dim, radius) + T * self.potential.lipschitz_bound(self.dim, radius)
            object.__setattr__(self, "control_bound", max(1.0, 10.0 * est))
        elif not (np.isfinite(self.control_bound) and self.control_bound > 0):
            raise ConfigurationError(f"control bound must be positive, got {self.control_bound}")
        object.__setattr__(self, "control_bound", float(self.control_bound))

    @property
    def C(self) -> float:
        return self.control_bound

    def lattice(self) -> np.ndarray:
        return control_lattice(self.dim, self.control_bound, self.control_K)

    def replace(self, **changes) -> "ProblemSpec":
        from dataclasses import replace
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ProvenanceWarning)
            return replace(self, **changes)

    def describe(self) -> dict:
        return {
            "dim": self.dim,
            "nu": self.nu,
            "horizon": {"t0": self.horizon.t0, "T": self.horizon.T, "N": self.horizon.N},
            "space": self.space.describe(),
            "potential": self.potential.label(),
            "terminal": self.terminal.label(),
            "control_bound": self.control_bound,
            "lagrangian": self.lagrangian,
            "control_K": self.control_K,
            "boundary_mode": self.boundary_mode,
        }


def hamiltonian_min(p, spec: ProblemSpec) -> dict:
    """Minimize ``L(u) + <u, p>`` over the ball ``|u| <= C``.

    The quadratic Lagrangian has the closed form ``u = -p min(1, C/|p|)``;
    other Lagrangians are minimized over the control lattice.
    """
    p = np.asarray(p, dtype=float).reshape(spec.dim)
    C = spec.control_bound
    if spec.lagrangian == "quadratic":
        norm = float(np.linalg.norm(p))
        scale = 1.0 if norm <= C else C / norm
        u = -p * scale
        return {"u_star": u, "value": float(0.5 * u @ u + u @ p)}
    lattice = spec.lattice()
    vals = lagrangian_value(spec.lagrangian, lattice) + lattice @ p
    i = int(np.argmin(vals))
    return {"u_star": lattice[i].copy(), "value": float(vals[i])}
