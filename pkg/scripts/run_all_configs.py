"""Run every shipped config through the CLI and print a one-line verdict per experiment.

Usage: python3 scripts/run_all_configs.py [OUT_DIR]
"""

import sys
from pathlib import Path

from pathctl.cli import main

ROOT = Path(__file__).resolve().parents[1]
SUBCOMMAND_OF = {"value": "value", "oracle": "oracle-compare", "dpp": "dpp", "drift": "drift",
                 "invariants": "invariants", "comparison": "comparison", "convergence": "convergence",
                 "hopf": "hopf-cole"}


def run(out_root: Path) -> int:
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.ini")):
        sub = SUBCOMMAND_OF[cfg.stem.split("_")[0]]
        worst = max(worst, main([sub, "--config", str(cfg), "--out", str(out_root / cfg.stem)]))
    return worst


if __name__ == "__main__":
    sys.exit(run(Path(sys.argv[1]) if len(sys.argv) > 1 else Path("pathctl-out")))
