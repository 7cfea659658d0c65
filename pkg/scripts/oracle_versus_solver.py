"""Compare the grid solver with the exhaustive control search and with adjoint descent.

Short horizons only: enumeration grows as (2K+1)^N.
"""

import argparse
import warnings

import numpy as np

from pathctl.fields import SpaceGrid, interpolate
from pathctl.oracle import ControlPath, brute_force_value, descent_refine
from pathctl.pathwise_value import solve
from pathctl.problem import ProblemSpec, make_entry
from pathctl.randomness import TimeGrid, generate_path


def main():
    warnings.simplefilter("ignore")
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--N", type=int, default=4)
    ap.add_argument("--K", type=int, default=40)
    ap.add_argument("--x", type=float, default=0.5)
    ap.add_argument("--terminal", default="quadratic", choices=["quadratic", "cosine"])
    a = ap.parse_args()
    spec = ProblemSpec(1, 0.25, TimeGrid(0.0, 1.0, a.N), SpaceGrid(1, -4.0, 4.0, 401),
                       make_entry("zero"), make_entry(a.terminal), control_bound=4.0, control_K=a.K)
    print(f"{'seed':>4} {'lattice':>11} {'descent':>11} {'shift':>11} {'splitting':>11}")
    for seed in range(a.seeds):
        path = generate_path(seed, spec.horizon, 1)
        orc = brute_force_value(spec, path, 0, [a.x], a.K, mode="lattice-dp")
        desc = descent_refine(spec, path, 0, [a.x], ControlPath.zeros(spec.horizon, 1, spec.C))
        vals = [float(np.ravel(interpolate(solve(spec, path, m).field(0), [a.x]))[0]) for m in ("shift", "splitting")]
        print(f"{seed:4d} {orc.value:11.6f} {desc.cost:11.6f} {vals[0]:11.6f} {vals[1]:11.6f}")


if __name__ == "__main__":
    main()
