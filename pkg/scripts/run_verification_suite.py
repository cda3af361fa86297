#!/usr/bin/env python3
"""Run the kernel and certificate experiments for the canonical measures.

Writes one results directory per measure under --out (default results/),
each containing the sampled kernel CSVs, the certificate report, and a
manifest.  A nonzero exit code means some hard inequality was violated.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from memkern.cli import run
from memkern.config import parse_config

CANONICAL = {
    "single03": [{"alpha": 0.3, "q": 1.0}],
    "single05": [{"alpha": 0.5, "q": 1.0}],
    "single08": [{"alpha": 0.8, "q": 1.0}],
    "twoatom": [{"alpha": 0.3, "q": 0.5}, {"alpha": 0.7, "q": 0.5}],
}


def measure_dict(atoms, weight=None):
    weight = weight or {"breaks": [], "values": []}
    return {"atoms": atoms, "weight": weight, "gamma_slack": 0.01}


def main() -> int:
    parser = argparse.ArgumentParser()
    parser.add_argument("--out", default="results")
    parser.add_argument("--steps", type=int, default=2048)
    args = parser.parse_args()

    measures = {name: measure_dict(atoms) for name, atoms in CANONICAL.items()}
    measures["uniform"] = measure_dict([], {"breaks": [0.0, 1.0],
                                            "values": [1.0]})
    worst = 0
    for name, measure in measures.items():
        for experiment in ("kernels", "verify"):
            config = parse_config({
                "experiment": experiment,
                "measure": measure,
                "horizon": 1.0,
                "n_steps": args.steps,
                "params": {"r": 0.5, "seed": 0},
            })
            out = Path(args.out) / name / experiment
            code = run(config, out)
            print(f"{name}/{experiment}: exit {code} -> {out}")
            worst = max(worst, code)
    return worst


if __name__ == "__main__":
    sys.exit(main())
