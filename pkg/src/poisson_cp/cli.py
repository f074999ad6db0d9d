"""Command-line harness: experiment runs, FIM analysis, packing/minimax checks.

Configuration comes from an optional flat key=value file with dotted section
prefixes (e.g. ``experiment.trials=50``); command-line flags override file
values, and every run echoes its effective configuration into the output
directory. Exit codes: 0 success, 1 user/config error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fim as fim_mod
from . import minimax as mm
from .estimator import equalize_l1
from .experiments import (
    ExperimentConfig,
    aggregate,
    converged_subset,
    gap_statistics,
    run_experiment,
    write_gap_csv,
    write_records_csv,
    write_summary_csv,
)
from .sampling import GenConfig, gen_rank_r_model
from .tensor_core import set_entry_cap

DEFAULT_OUT = "poisson-cp-out"


class ConfigError(ValueError):
    """User or configuration mistake; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def _fmt(x: float) -> str:
    return format(float(x), ".12g")


# ---------------------------------------------------------------------------
# Config file and flag resolution
# ---------------------------------------------------------------------------

def parse_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def _parse_bool(s: str) -> bool:
    low = s.strip().lower()
    if low in ("on", "true", "1", "yes"):
        return True
    if low in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {s!r}")


def _parse_int_list(s: str) -> tuple[int, ...]:
    return tuple(int(part) for part in s.split(",") if part.strip())


def _parse_quantiles(s: str) -> tuple[float, float]:
    parts = [float(p) for p in s.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected lo,hi, got {s!r}")
    return parts[0], parts[1]


class Resolver:
    """Merges flag values over config-file values, recording what was used."""

    def __init__(self, section: str, file_values: dict[str, str]):
        self.section = section
        self.file_values = file_values
        self.effective: dict[str, str] = {}

    def get(self, key: str, flag_value, convert, default=None, required=False):
        field = f"{self.section}.{key}"
        if flag_value is not None:
            value = flag_value
        elif field in self.file_values:
            try:
                value = convert(self.file_values[field])
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"invalid value for {field}: {exc}") from exc
        elif required:
            raise ConfigError(f"missing required field {field}")
        else:
            value = default
        if value is not None:
            self.effective[field] = _render(value)
        return value

    def echo(self, out_dir: Path) -> None:
        out_dir.mkdir(parents=True, exist_ok=True)
        lines = [f"{k}={v}" for k, v in sorted(self.effective.items())]
        (out_dir / "effective.cfg").write_text("\n".join(lines) + "\n")


def _render(value) -> str:
    if isinstance(value, bool):
        return "on" if value else "off"
    if isinstance(value, float):
        return _fmt(value)
    if isinstance(value, tuple):
        return ",".join(_render(v) for v in value)
    return str(value)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> _Parser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key=value config file")
    common.add_argument("--out", help=f"output directory (default {DEFAULT_OUT})")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--rank", type=int, help="CP rank R")
    common.add_argument("--N", type=int, dest="N", help="tensor order")
    common.add_argument("--I", dest="I", help="comma-separated dimension sizes")
    common.add_argument("--trials", type=int, help="trials per grid point")
    common.add_argument("--beta", type=float, help="lower entry bound")
    common.add_argument("--alpha", type=float, help="upper entry bound")
    common.add_argument("--align", choices=["on", "off"], help="component alignment")
    common.add_argument("--quantiles", help="lo,hi percentiles for bands")
    common.add_argument(
        "--allow-large", action="store_true", help="lift the dense allocation guard"
    )

    parser = _Parser(prog="poisson-cp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("experiment", parents=[common], help="run the Monte Carlo harness")
    sub.add_parser("fim", parents=[common], help="Fisher information analysis of a seeded model")
    pk = sub.add_parser("packing", parents=[common], help="packing set and minimax bound")
    pk.add_argument("--epsilon", type=float, help="override the tuned epsilon")
    pk.add_argument("--dump", help="write the packing set's bit matrices to this file")
    pk.add_argument("--verify-dump", help="re-verify a previously dumped packing set")
    return parser


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_experiment(args, file_values) -> int:
    res = Resolver("experiment", file_values)
    I_values = res.get("I", _parse_int_list(args.I) if args.I else None, _parse_int_list, required=True)
    pinv_rank = res.get("pinv_rank", None, int, default=None)
    pinv_threshold = res.get("pinv_threshold", None, float, default=None)
    if pinv_rank is not None and pinv_threshold is not None:
        raise ConfigError("set at most one of experiment.pinv_rank / experiment.pinv_threshold")
    policy = None
    if pinv_rank is not None:
        policy = fim_mod.RankPolicy.fixed(pinv_rank)
    elif pinv_threshold is not None:
        policy = fim_mod.RankPolicy.threshold(pinv_threshold)
    cfg = ExperimentConfig(
        I_values=I_values,
        N=res.get("N", args.N, int, default=3),
        R=res.get("rank", args.rank, int, default=1),
        beta=res.get("beta", args.beta, float, default=1.0),
        alpha=res.get("alpha", args.alpha, float, default=2.0),
        trials=res.get("trials", args.trials, int, default=50),
        seed=res.get("seed", args.seed, int, default=0),
        align=res.get("align", None if args.align is None else args.align == "on", _parse_bool, default=True),
        quantiles=res.get("quantiles", _parse_quantiles(args.quantiles) if args.quantiles else None, _parse_quantiles, default=(0.0, 90.0)),
        restarts=res.get("restarts", None, int, default=1),
        max_iter=res.get("max_iter", None, int, default=500),
        tol=res.get("tol", None, float, default=1e-8),
        name=res.get("name", None, str, default=None),
        include_nonconverged=res.get("include_nonconverged", None, _parse_bool, default=True),
        record_timing=res.get("record_timing", None, _parse_bool, default=True),
        threads=res.get("threads", None, int, default=None),
        pinv_policy=policy,
    )
    out_dir = Path(res.get("out", args.out, str, default=DEFAULT_OUT))
    res.echo(out_dir)

    records = run_experiment(cfg)
    pool = records if cfg.include_nonconverged else converged_subset(records)
    if not pool:
        raise RuntimeError("no records left to aggregate (all trials non-converged)")
    summary = aggregate(pool, cfg.quantiles)
    write_records_csv(records, out_dir / "records.csv")
    write_summary_csv(summary, out_dir / "summary.csv")
    if cfg.R > 1:
        write_gap_csv(gap_statistics(pool, cfg.quantiles), out_dir / "gap.csv")

    n_groups = len({(r.experiment, r.I, r.N, r.R) for r in records})
    converged = sum(r.converged for r in records)
    print(f"{len(records)} records in {n_groups} groups -> {out_dir}")
    print(f"converged: {converged}/{len(records)}")
    for row in summary:
        if row.stat == "mean":
            print(
                f"I={row.I} N={row.N} R={row.R}: mean mse={_fmt(row.mse)} "
                f"mean fim_trace={_fmt(row.fim_trace)}"
            )
    return 0


def cmd_fim(args, file_values) -> int:
    res = Resolver("fim", file_values)
    I_values = res.get("I", _parse_int_list(args.I) if args.I else None, _parse_int_list, required=True)
    if len(I_values) != 1:
        raise ConfigError(f"fim.I must be a single dimension size, got {I_values}")
    I = I_values[0]
    N = res.get("N", args.N, int, default=3)
    R = res.get("rank", args.rank, int, default=1)
    beta = res.get("beta", args.beta, float, default=1.0)
    alpha = res.get("alpha", args.alpha, float, default=2.0)
    seed = res.get("seed", args.seed, int, default=0)
    out_dir = Path(res.get("out", args.out, str, default=DEFAULT_OUT))
    res.echo(out_dir)

    model = gen_rank_r_model(GenConfig(I=I, N=N, R=R, beta=beta, alpha=alpha, seed=seed))
    model_l1, lams = equalize_l1(model)
    result = (
        fim_mod.fim_rank_one_closed_form(model_l1)
        if R == 1
        else fim_mod.fim_jacobian(model_l1)
    )
    print(f"model: I={I} N={N} R={R} beta={_fmt(beta)} alpha={_fmt(alpha)} seed={seed}")
    print(f"lambda per component: {' '.join(_fmt(v) for v in lams)}")
    print(f"matrix size: {result.matrix.shape[0]}x{result.matrix.shape[1]}")
    if R == 1:
        print(f"numerical rank: {result.numerical_rank} ((I-1)N+1 = {(I - 1) * N + 1})")
    else:
        print(f"numerical rank: {result.numerical_rank} of {result.matrix.shape[0]}")
    ev = result.eigenvalues
    head = " ".join(_fmt(v) for v in ev[: min(4, ev.size)])
    print(f"eigenvalues: largest [{head}] smallest retained {_fmt(ev[result.numerical_rank - 1])}")
    print(f"pinv trace ({result.policy.describe()}): {_fmt(result.pinv_trace)}")
    bounds = fim_mod.trace_bounds(I, N, beta, alpha)
    print(f"trace bounds: lower={_fmt(bounds.lower)} upper={_fmt(bounds.upper)}")
    if R == 1:
        ok = bounds.lower - 1e-9 <= result.pinv_trace <= bounds.upper + 1e-9
        print(f"containment lower <= trace <= upper: {'PASS' if ok else 'FAIL'}")
        return 0 if ok else 2
    print("containment check: n/a for R > 1 (bounds are rank-one)")
    return 0


def _print_check(name: str, ok: bool) -> None:
    print(f"check {name}: {'PASS' if ok else 'FAIL'}")


def cmd_packing(args, file_values) -> int:
    res = Resolver("packing", file_values)
    I_values = res.get("I", _parse_int_list(args.I) if args.I else None, _parse_int_list, required=True)
    if len(I_values) != 1:
        raise ConfigError(f"packing.I must be a single dimension size, got {I_values}")
    I = I_values[0]
    N = res.get("N", args.N, int, default=3)
    R = res.get("rank", args.rank, int, default=1)
    beta_t = res.get("beta", args.beta, float, default=1.0)
    alpha_t = res.get("alpha", args.alpha, float, default=2.0)
    seed = res.get("seed", args.seed, int, default=0)
    epsilon = res.get("epsilon", getattr(args, "epsilon", None), float, default=None)
    out_dir = Path(res.get("out", args.out, str, default=DEFAULT_OUT))
    res.echo(out_dir)

    if getattr(args, "verify_dump", None):
        return _verify_dump(args.verify_dump, I, N, R, beta_t, alpha_t, epsilon)

    checks = mm.minimax_preconditions(I, R, beta_t, alpha_t, N)
    for name, ok in checks.items():
        _print_check(name, ok)
    if not all(checks.values()):
        print("minimax lower bound: unavailable (preconditions failed)")
        return 1

    if epsilon is None:
        epsilon = mm.choose_epsilon(I, N, R, beta_t, alpha_t)
    print(f"epsilon: {_fmt(epsilon)}")

    ps = mm.build_packing_set(I, N, R, beta_t, alpha_t, epsilon, seed)
    report = mm.verify_packing(ps)
    print(f"cardinality: {report.cardinality} (need >= {_fmt(2.0 ** (I * R / 8.0))})")
    print(
        f"pairwise distance: [{_fmt(report.min_distance)}, {_fmt(report.max_distance)}] "
        f"(required [{_fmt(ps.separation)}, {_fmt(ps.spacing_upper)}])"
    )
    _print_check("cardinality", report.cardinality_ok)
    _print_check("entry range", report.entries_ok)
    _print_check("pairwise spacing", report.spacing_ok)
    _print_check(f"block rank <= {R}", report.rank_ok)

    gamma = mm.kl_upper_bound(ps)
    max_kl = mm.max_pairwise_kl(ps)
    log_m = math.log(report.cardinality)
    print(f"gamma (KL cap): {_fmt(gamma)}  max pairwise KL: {_fmt(max_kl)}")
    print(f"log M_delta: {_fmt(log_m)}  2(gamma + log 2): {_fmt(2 * (gamma + math.log(2)))}")
    _print_check("max KL <= gamma", max_kl <= gamma + 1e-9)
    _print_check("log M_delta >= 2(gamma + log 2)", log_m >= 2 * (gamma + math.log(2)) - 1e-9)

    bound = mm.minimax_lower_bound(I, R, beta_t, alpha_t, N)
    print(f"minimax lower bound: {_fmt(bound)}")

    if getattr(args, "dump", None):
        _write_dump(ps, args.dump)
        print(f"dumped {ps.cardinality} bit matrices to {args.dump}")
    return 0 if report.all_ok else 2


def _write_dump(ps: mm.PackingSet, path: str) -> None:
    blocks = []
    for k in range(ps.cardinality):
        bits = ps.codes[k].reshape(ps.I, ps.R)
        blocks.append("\n".join("".join(str(int(b)) for b in row) for row in bits))
    Path(path).write_text("\n\n".join(blocks) + "\n")


def _read_dump(path: str, I: int, R: int) -> np.ndarray:
    text = Path(path).read_text()
    codes = []
    for block in text.strip().split("\n\n"):
        rows = block.strip().splitlines()
        if len(rows) != I or any(len(r) != R for r in rows):
            raise ValueError(f"malformed bit matrix (expected {I} rows of {R} bits)")
        if any(ch not in "01" for row in rows for ch in row):
            raise ValueError("bit matrix contains characters other than 0/1")
        codes.append([int(ch) for row in rows for ch in row])
    return np.array(codes, dtype=np.uint8)


def _verify_dump(path, I, N, R, beta_t, alpha_t, epsilon) -> int:
    # Any failure here means a corrupted artifact, not a usage error: exit 2.
    try:
        if epsilon is None:
            epsilon = mm.choose_epsilon(I, N, R, beta_t, alpha_t)
        codes = _read_dump(path, I, R)
        ps = mm.PackingSet(codes, I, N, R, beta_t, alpha_t, epsilon)
        report = mm.verify_packing(ps)
        min_dist = min(
            int((codes[i] != codes[j]).sum())
            for i in range(len(codes))
            for j in range(i + 1, len(codes))
        )
        code_ok = (
            bool((codes == 0).all(axis=1).any()) and min_dist >= math.ceil(I * R / 8)
        )
        _print_check("dump code separation", code_ok)
        _print_check("dump packing properties", report.all_ok)
        if code_ok and report.all_ok:
            print("dump verification: PASS")
            return 0
        print("dump verification: FAIL")
        return 2
    except Exception as exc:  # noqa: BLE001 - corrupted dumps land here
        print(f"dump verification failed: {exc}", file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        file_values = parse_config_file(args.config) if args.config else {}
        if args.allow_large:
            set_entry_cap(None)
        handler = {
            "experiment": cmd_experiment,
            "fim": cmd_fim,
            "packing": cmd_packing,
        }[args.command]
        return handler(args, file_values)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - runtime failures map to exit 2
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
