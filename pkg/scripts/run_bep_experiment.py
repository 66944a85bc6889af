"""Exact vs fluid vs simulated moments for the three-queue BEP system.

Usage: python scripts/run_bep_experiment.py [--scales 1,10,100] [--cycles 20000] [--out results/bep]
"""

import argparse

from polling_moments.experiment import ExperimentSpec, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/three_queue_bep.yaml")
    ap.add_argument("--scales", default="1,10,100")
    ap.add_argument("--orders", default="1,2,3")
    ap.add_argument("--cycles", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=12345)
    ap.add_argument("--out", default="results/bep")
    args = ap.parse_args()
    scales = tuple(int(v) for v in args.scales.split(","))
    orders = tuple(int(v) for v in args.orders.split(","))
    table = run_experiment(ExperimentSpec(config=args.config, scales=scales, orders=orders,
                                          cycles=args.cycles, seed=args.seed, out=args.out))
    print(f"{'p':>2} " + " ".join(f"{'n=' + str(n):>10}" for n in scales) + "   (MAPE %, queue cells)")
    for p in orders:
        print(f"{p:>2} " + " ".join(f"{table.mape(n, p):10.3f}" for n in scales))
    print(f"table written to {args.out}/comparison.csv")


if __name__ == "__main__":
    main()
