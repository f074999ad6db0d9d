"""Seeded generation of ground-truth CP models and Poisson count sampling.

Each trial owns an independent RNG stream derived from a numpy SeedSequence
key, so trials are reproducible regardless of scheduling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import CpModel, DenseTensor


@dataclass(frozen=True)
class GenConfig:
    """Ground-truth generator settings: cubical I^N tensor of CP rank R with
    reconstructed entries inside [beta, alpha]."""

    I: int
    N: int
    R: int
    beta: float
    alpha: float
    seed: int | np.random.SeedSequence = 0

    def __post_init__(self):
        if self.N < 2:
            raise ValueError("N must be >= 2")
        if self.I < 1:
            raise ValueError("I must be positive")
        if self.R < 1:
            raise ValueError("R must be positive")
        if not self.beta > 0:
            raise ValueError("beta must be > 0")
        if self.alpha < self.beta:
            raise ValueError("alpha must be >= beta")

    @property
    def factor_interval(self) -> tuple[float, float]:
        """Per-entry uniform range [ (beta/R)^(1/N), (alpha/R)^(1/N) ]; any
        sum of R products of N such entries lands in [beta, alpha]."""
        return (
            (self.beta / self.R) ** (1.0 / self.N),
            (self.alpha / self.R) ** (1.0 / self.N),
        )


def _rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def gen_rank_r_model(cfg: GenConfig) -> CpModel:
    """Factor entries i.i.d. uniform on cfg.factor_interval."""
    lo, hi = cfg.factor_interval
    rng = _rng(cfg.seed)
    factors = tuple(rng.uniform(lo, hi, size=(cfg.I, cfg.R)) for _ in range(cfg.N))
    return CpModel(factors)


def gen_rank_one_model(cfg: GenConfig) -> CpModel:
    if cfg.R != 1:
        raise ValueError(f"rank-one generator called with R={cfg.R}")
    return gen_rank_r_model(cfg)


def sample_poisson_tensor(m: DenseTensor, seed) -> DenseTensor:
    """Entrywise-independent Poisson counts with rate tensor m (> 0)."""
    rates = m.data
    if not np.all(rates > 0):
        raise ValueError("all rate entries must be strictly positive")
    rng = _rng(seed)
    return DenseTensor(rng.poisson(rates).astype(np.float64))
