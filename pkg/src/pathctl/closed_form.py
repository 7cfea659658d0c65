"""Per-path closed forms for V = const with linear or quadratic terminal cost.

With ``q = x + sqrt(nu) (W_T - W_t)`` and ``tau = T - t``:

* ``S = <p, x>``:        ``U = <p, q> - |p|^2 tau / 2 + c tau``,  ``u* = -p``
* ``S = kappa |x|^2/2``: ``U = kappa |q|^2 / (2 (1 + kappa tau)) + c tau``,
  ``u* = -kappa q / (1 + kappa tau)``

The linear form needs ``|p| <= C`` and the quadratic one ``|u*| <= C`` on the
region of interest.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemSpec
from .randomness import BrownianPath


@dataclass(frozen=True, eq=False)
class ClosedForm:
    spec: ProblemSpec
    path: BrownianPath
    kind: str

    def _q(self, k: int, x: np.ndarray) -> np.ndarray:
        W = self.path.values
        return x + np.sqrt(self.spec.nu) * (W[-1] - W[k])

    def _tau(self, k: int) -> float:
        g = self.path.grid
        return g.T - g.node(k)

    def _const(self) -> float:
        pot = self.spec.potential
        if pot.identifier == "zero":
            return pot.offset
        return float(pot.param("c", 0.0)) + pot.offset

    def value(self, k: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        q, tau = self._q(k, x), self._tau(k)
        S = self.spec.terminal
        run = self._const() * tau
        if self.kind == "linear":
            a = np.asarray(S.param("a"), dtype=float)
            a = np.broadcast_to(a, (self.spec.dim,)) if a.size == 1 and self.spec.dim == 1 else a
            return q @ a - 0.5 * float(a @ a) * tau + S.offset + run
        if self.kind == "quadratic":
            kappa = float(S.param("kappa", 1.0))
            return kappa * np.sum(q * q, axis=-1) / (2.0 * (1.0 + kappa * tau)) + S.offset + run
        return np.full(x.shape[:-1], S.offset + run)

    def drift(self, k: int, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        S = self.spec.terminal
        if self.kind == "linear":
            a = np.asarray(S.param("a"), dtype=float).reshape(-1)
            return np.broadcast_to(-a, x.shape).copy()
        if self.kind == "quadratic":
            kappa = float(S.param("kappa", 1.0))
            return -kappa * self._q(k, x) / (1.0 + kappa * self._tau(k))
        return np.zeros(x.shape)

    def value_table(self) -> np.ndarray:
        pts = self.spec.space.points
        return np.stack([self.value(k, pts) for k in range(self.path.grid.N + 1)])

    def drift_table(self) -> np.ndarray:
        pts = self.spec.space.points
        return np.stack([self.drift(k, pts) for k in range(self.path.grid.N + 1)])


def closed_form_for(spec: ProblemSpec, path: BrownianPath) -> ClosedForm | None:
    """The closed form for ``spec`` on ``path``, or None when none is known."""
    if spec.lagrangian != "quadratic" or spec.potential.identifier not in ("zero", "constant"):
        return None
    kind = spec.terminal.identifier
    if kind in ("zero", "constant"):
        if kind == "constant":
            return None if spec.terminal.param("c", 0.0) else ClosedForm(spec, path, "zero")
        return ClosedForm(spec, path, "zero")
    if kind == "linear":
        a = np.asarray(spec.terminal.param("a"), dtype=float)
        if np.linalg.norm(a) > spec.control_bound:
            return None
        return ClosedForm(spec, path, "linear")
    if kind == "quadratic" and float(spec.terminal.param("kappa", 1.0)) > 0:
        return ClosedForm(spec, path, "quadratic")
    return None
