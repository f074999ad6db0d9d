#!/usr/bin/env python3
"""Regenerate the frontend's golden summary CSV (small, fully deterministic)."""

import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from poisson_cp.experiments import (  # noqa: E402
    ExperimentConfig,
    aggregate,
    run_rank_one_experiment,
    write_summary_csv,
)

OUT = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def main() -> int:
    cfg = ExperimentConfig(
        I_values=(6, 8, 10), N=3, R=1, trials=8, seed=424242,
        quantiles=(0.0, 90.0), record_timing=False, threads=1,
    )
    records = run_rank_one_experiment(cfg)
    OUT.mkdir(parents=True, exist_ok=True)
    write_summary_csv(aggregate(records, cfg.quantiles), OUT / "golden_summary.csv")
    print(f"wrote {OUT / 'golden_summary.csv'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
