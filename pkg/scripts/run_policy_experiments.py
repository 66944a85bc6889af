"""Fluid-approximation error for BEP, BGP and BSP on the three-queue system.

Usage: python scripts/run_policy_experiments.py [--scales 1,10,100] [--cycles 20000] [--out results]
"""

import argparse
from pathlib import Path

from polling_moments.experiment import ExperimentSpec, run_experiment

CONFIGS = ("three_queue_bep.yaml", "three_queue_bgp.yaml", "three_queue_bsp.yaml")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs-dir", default="configs")
    ap.add_argument("--scales", default="1,10,100")
    ap.add_argument("--cycles", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    scales = tuple(int(v) for v in args.scales.split(","))
    for name in CONFIGS:
        out = Path(args.out) / Path(name).stem
        table = run_experiment(ExperimentSpec(config=str(Path(args.configs_dir) / name), scales=scales,
                                              orders=(1, 2, 3), cycles=args.cycles, seed=args.seed,
                                              out=str(out)))
        print(f"{table.policy}: MAPE % of (n q)^p by scale {scales}")
        for p in (1, 2, 3):
            print(f"  p={p} " + " ".join(f"{table.mape(n, p):9.3f}" for n in scales))


if __name__ == "__main__":
    main()
