"""Monte Carlo harness: generate truth, sample counts, fit, normalize, score.

Per-trial RNG streams are keyed by (master seed, I, N, R, trial), so every
grid point reproduces independently and results do not depend on worker
scheduling. Aggregation is an ordered reduction over (I, trial).
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .estimator import (
    FitOptions,
    align_components,
    equalize_l1,
    equalize_l2,
    factor_mse,
    fit_rank_r,
)
from .fim import RankPolicy, fim_jacobian, fim_rank_one_closed_form, pinv_trace
from .sampling import GenConfig, gen_rank_r_model, sample_poisson_tensor
from .tensor_core import cp_reconstruct

THREADS_ENV = "POISSON_CP_THREADS"


@dataclass(frozen=True)
class ExperimentConfig:
    I_values: tuple[int, ...]
    N: int
    R: int
    beta: float = 1.0
    alpha: float = 2.0
    trials: int = 50
    seed: int = 0
    align: bool = True
    quantiles: tuple[float, float] = (0.0, 90.0)
    restarts: int = 1
    max_iter: int = 500
    tol: float = 1e-8
    name: str | None = None
    include_nonconverged: bool = True
    record_timing: bool = True
    threads: int | None = None  # None: POISSON_CP_THREADS env var, else 1
    pinv_policy: RankPolicy | None = None  # None: fixed rank for R=1, threshold else

    def __post_init__(self):
        object.__setattr__(self, "I_values", tuple(int(i) for i in self.I_values))
        if not self.I_values:
            raise ValueError("I_values must be nonempty")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        lo, hi = self.quantiles
        if not (0.0 <= lo <= hi <= 100.0):
            raise ValueError(f"quantiles must be ascending in [0, 100], got {self.quantiles}")

    @property
    def experiment_name(self) -> str:
        return self.name or f"rank{self.R}"


@dataclass(frozen=True)
class ExperimentRecord:
    experiment: str
    I: int
    N: int
    R: int
    trial: int
    seed: int
    mse: float
    fim_trace: float
    objective: float
    converged: bool
    wall_ms: float


def _run_trial(cfg: ExperimentConfig, I: int, trial: int) -> ExperimentRecord:
    key = np.random.SeedSequence([cfg.seed, I, cfg.N, cfg.R, trial])
    gen_seed, sample_seed, fit_seed = (int(s) for s in key.generate_state(3, np.uint64))
    t0 = time.perf_counter()

    gcfg = GenConfig(I=I, N=cfg.N, R=cfg.R, beta=cfg.beta, alpha=cfg.alpha, seed=gen_seed)
    truth = gen_rank_r_model(gcfg)
    counts = sample_poisson_tensor(cp_reconstruct(truth), sample_seed)
    fit = fit_rank_r(
        counts,
        FitOptions(
            rank=cfg.R,
            restarts=cfg.restarts,
            max_iter=cfg.max_iter,
            tol=cfg.tol,
            seed=fit_seed,
            init_interval=gcfg.factor_interval,
        ),
    )

    est = equalize_l2(fit.model)
    truth_eq = equalize_l2(truth)
    if cfg.align and cfg.R > 1:
        est = align_components(est, truth_eq)
    mse = factor_mse(est, truth_eq)

    # The CRLB is evaluated at the true parameters, l1-equalized per component.
    truth_l1, _ = equalize_l1(truth)
    fim = fim_rank_one_closed_form(truth_l1) if cfg.R == 1 else fim_jacobian(truth_l1)
    trace = fim.pinv_trace if cfg.pinv_policy is None else pinv_trace(fim, cfg.pinv_policy)

    wall_ms = (time.perf_counter() - t0) * 1000.0 if cfg.record_timing else 0.0
    return ExperimentRecord(
        experiment=cfg.experiment_name,
        I=I,
        N=cfg.N,
        R=cfg.R,
        trial=trial,
        seed=gen_seed,
        mse=mse,
        fim_trace=trace,
        objective=fit.objective,
        converged=fit.converged,
        wall_ms=wall_ms,
    )


def _worker_count(cfg: ExperimentConfig) -> int:
    env = os.environ.get(THREADS_ENV)
    cap = max(1, int(env)) if env else None
    workers = cfg.threads if cfg.threads is not None else (cap or 1)
    if cap is not None:
        workers = min(workers, cap)
    return max(1, workers)


def run_experiment(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    """One record per (I, trial), in grid order regardless of thread count."""
    jobs = [(I, t) for I in cfg.I_values for t in range(cfg.trials)]
    workers = _worker_count(cfg)
    if workers == 1:
        return [_run_trial(cfg, I, t) for I, t in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {job: pool.submit(_run_trial, cfg, *job) for job in jobs}
        return [futures[job].result() for job in jobs]


def run_rank_one_experiment(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    if cfg.R != 1:
        raise ValueError(f"rank-one experiment needs R=1, got {cfg.R}")
    return run_experiment(cfg)


def run_rank_r_experiment(cfg: ExperimentConfig) -> list[ExperimentRecord]:
    if cfg.R < 2:
        raise ValueError(f"rank-R experiment needs R >= 2, got {cfg.R}")
    return run_experiment(cfg)


def converged_subset(records: list[ExperimentRecord]) -> list[ExperimentRecord]:
    return [r for r in records if r.converged]


# ---------------------------------------------------------------------------
# Aggregation and CSV output
# ---------------------------------------------------------------------------

RECORDS_HEADER = "experiment,I,N,R,trial,seed,mse,fim_trace,objective,converged,wall_ms"
SUMMARY_HEADER = "experiment,I,N,R,stat,mse,fim_trace"
GAP_HEADER = "experiment,I,N,R,gap,frac_within_band"

SUMMARY_STATS = ("mean", "min", "max", "median", "qlo", "qhi")


@dataclass(frozen=True)
class SummaryRow:
    experiment: str
    I: int
    N: int
    R: int
    stat: str
    mse: float
    fim_trace: float


@dataclass(frozen=True)
class GapRow:
    experiment: str
    I: int
    N: int
    R: int
    gap: float
    frac_within_band: float


def _groups(records: list[ExperimentRecord]):
    order: list[tuple] = []
    grouped: dict[tuple, list[ExperimentRecord]] = {}
    for r in records:
        key = (r.experiment, r.I, r.N, r.R)
        if key not in grouped:
            grouped[key] = []
            order.append(key)
        grouped[key].append(r)
    return order, grouped


def aggregate(
    records: list[ExperimentRecord], band: tuple[float, float]
) -> list[SummaryRow]:
    """Per (experiment, I, N, R) group: mean/min/max plus median and the
    requested percentile band. Quantiles use linear interpolation between
    order statistics."""
    if not records:
        raise ValueError("cannot aggregate an empty record list")
    lo, hi = band
    order, grouped = _groups(records)
    rows = []
    for key in order:
        group = grouped[key]
        mse = np.array([g.mse for g in group])
        tr = np.array([g.fim_trace for g in group])
        stats = {
            "mean": (mse.mean(), tr.mean()),
            "min": (mse.min(), tr.min()),
            "max": (mse.max(), tr.max()),
            "median": (np.median(mse), np.median(tr)),
            "qlo": (np.percentile(mse, lo), np.percentile(tr, lo)),
            "qhi": (np.percentile(mse, hi), np.percentile(tr, hi)),
        }
        for stat in SUMMARY_STATS:
            m, t = stats[stat]
            rows.append(SummaryRow(*key, stat, float(m), float(t)))
    return rows


def gap_statistics(
    records: list[ExperimentRecord], band: tuple[float, float]
) -> list[GapRow]:
    """mean(mse) - mean(fim_trace) per group, plus the fraction of trials with
    mse at or below the band's upper percentile."""
    if not records:
        raise ValueError("cannot summarize an empty record list")
    _, hi = band
    order, grouped = _groups(records)
    rows = []
    for key in order:
        group = grouped[key]
        mse = np.array([g.mse for g in group])
        tr = np.array([g.fim_trace for g in group])
        ceiling = np.percentile(mse, hi)
        rows.append(
            GapRow(
                *key,
                gap=float(mse.mean() - tr.mean()),
                frac_within_band=float(np.mean(mse <= ceiling)),
            )
        )
    return rows


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


def write_records_csv(records: list[ExperimentRecord], path) -> None:
    lines = [RECORDS_HEADER]
    for r in records:
        lines.append(
            ",".join(
                [
                    r.experiment,
                    str(r.I),
                    str(r.N),
                    str(r.R),
                    str(r.trial),
                    str(r.seed),
                    _fmt(r.mse),
                    _fmt(r.fim_trace),
                    _fmt(r.objective),
                    "true" if r.converged else "false",
                    _fmt(r.wall_ms),
                ]
            )
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_summary_csv(rows: list[SummaryRow], path) -> None:
    lines = [SUMMARY_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [r.experiment, str(r.I), str(r.N), str(r.R), r.stat, _fmt(r.mse), _fmt(r.fim_trace)]
            )
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_gap_csv(rows: list[GapRow], path) -> None:
    lines = [GAP_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                [
                    r.experiment,
                    str(r.I),
                    str(r.N),
                    str(r.R),
                    _fmt(r.gap),
                    _fmt(r.frac_within_band),
                ]
            )
        )
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
