#!/usr/bin/env python3
"""Rank-one near-efficiency runs: mean MSE vs mean FIM-PI trace over I.

Desk scale by default; the full-size grid (I up to 100 at N=4) sits behind
--scale full and takes hours.
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from poisson_cp.experiments import (  # noqa: E402
    ExperimentConfig,
    aggregate,
    run_rank_one_experiment,
    write_records_csv,
    write_summary_csv,
)

GRIDS = {
    "desk": {3: (20, 30, 40, 50), 4: (10, 15, 20)},
    "full": {3: (50, 75, 100), 4: (50, 75, 100)},
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--scale", choices=GRIDS, default="desk")
    ap.add_argument("--trials", type=int, default=50)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--threads", type=int, default=None)
    ap.add_argument("--out", default="results/rank1")
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for N, I_values in GRIDS[args.scale].items():
        cfg = ExperimentConfig(
            I_values=I_values, N=N, R=1, trials=args.trials,
            seed=args.seed, threads=args.threads,
        )
        records = run_rank_one_experiment(cfg)
        write_records_csv(records, out / f"records_N{N}.csv")
        write_summary_csv(aggregate(records, cfg.quantiles), out / f"summary_N{N}.csv")
        for I in I_values:
            sub = [r for r in records if r.I == I]
            mse = sum(r.mse for r in sub) / len(sub)
            tr = sum(r.fim_trace for r in sub) / len(sub)
            print(f"N={N} I={I}: mean mse {mse:.6g}  mean fim trace {tr:.6g}  ratio {mse / tr:.3f}")
    print(f"wrote CSVs to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
