"""Constructive packing sets, Poisson KL divergence, and the minimax bound.

Packing elements are block tensors A(M) o 1 o ... o 1 built from I x R
two-level matrices indexed by a binary code with guaranteed pairwise Hamming
separation. Elements are stored implicitly (IR bits each) and materialized on
demand; pairwise Frobenius and KL statistics reduce to the A matrices times
an I^(N-2) replication factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tensor_core import DenseTensor, check_entry_cap


class PackingConstructionError(RuntimeError):
    """Randomized code search exhausted its attempt budget; retry with a new seed."""


def vg_binary_code(m: int, seed, target: int | None = None) -> np.ndarray:
    """Binary vectors (rows) containing zero, pairwise Hamming distance
    >= ceil(m/8), at least ceil(2^(m/8)) of them.

    Randomized greedy: sample candidates, keep those far from everything
    accepted so far, give up after 200 * 2^(m/8) candidates.
    """
    if m <= 8:
        raise ValueError(f"need m > 8, got {m}")
    min_dist = math.ceil(m / 8)
    if target is None:
        target = math.ceil(2.0 ** (m / 8))
    budget = int(200 * 2.0 ** (m / 8))
    rng = np.random.default_rng(seed)
    accepted = np.zeros((1, m), dtype=np.uint8)
    attempts = 0
    while accepted.shape[0] < target:
        if attempts >= budget:
            raise PackingConstructionError(
                f"found {accepted.shape[0]}/{target} codewords after {budget} "
                f"candidates (m={m}); retry with a different seed"
            )
        # Draw a batch; accept greedily within it.
        batch = rng.integers(0, 2, size=(min(256, budget - attempts), m), dtype=np.uint8)
        attempts += batch.shape[0]
        for cand in batch:
            if (cand != accepted).sum(axis=1).min() >= min_dist:
                accepted = np.vstack([accepted, cand[None, :]])
                if accepted.shape[0] >= target:
                    break
    accepted.flags.writeable = False
    return accepted


@dataclass(frozen=True)
class PackingSet:
    """Family of rank-<=R tensors in S_R(beta_t, alpha_t), stored as binary
    codes plus the block recipe."""

    codes: np.ndarray  # (M, I*R) binary
    I: int
    N: int
    R: int
    beta_t: float
    alpha_t: float
    epsilon: float

    def __post_init__(self):
        codes = np.ascontiguousarray(self.codes, dtype=np.uint8)
        codes.flags.writeable = False
        object.__setattr__(self, "codes", codes)

    @property
    def cardinality(self) -> int:
        return self.codes.shape[0]

    @property
    def step(self) -> float:
        """Gap between the two entry levels, epsilon (alpha_t - beta_t)."""
        return self.epsilon * (self.alpha_t - self.beta_t)

    @property
    def separation(self) -> float:
        """Guaranteed pairwise Frobenius distance delta."""
        return 0.25 * self.step * math.sqrt(float(self.I) ** self.N)

    @property
    def spacing_upper(self) -> float:
        return self.step * math.sqrt(float(self.I) ** self.N)

    def base_matrix(self, k: int) -> np.ndarray:
        """I x R matrix of element k with entries in {beta_t, beta_t + step}."""
        bits = self.codes[k].reshape(self.I, self.R).astype(np.float64)
        return self.beta_t + self.step * bits

    def block_matrix(self, k: int) -> np.ndarray:
        """I x I matrix A(M_k): M_k repeated floor(I/R) times plus its first
        I - R*floor(I/R) columns."""
        m = self.base_matrix(k)
        reps, rem = divmod(self.I, self.R)
        return np.hstack([m] * reps + ([m[:, :rem]] if rem else []))

    def element(self, k: int) -> DenseTensor:
        """Materialize element k: entries t[i1,...,iN] = A(M_k)[i1, i2]."""
        check_entry_cap(self.I**self.N)
        a = self.block_matrix(k)
        shape = (self.I, self.I) + (1,) * (self.N - 2)
        return DenseTensor(np.broadcast_to(a.reshape(shape), (self.I,) * self.N).copy())


def build_packing_set(
    I: int, N: int, R: int, beta_t: float, alpha_t: float, epsilon: float, seed
) -> PackingSet:
    if N < 2:
        raise ValueError("need N >= 2")
    if not 1 <= R <= I:
        raise ValueError(f"need 1 <= R <= I, got R={R} I={I}")
    if I * R <= 8:
        raise ValueError(f"need I*R > 8, got {I * R}")
    if not 0 < epsilon <= 1:
        raise ValueError(f"need epsilon in (0, 1], got {epsilon}")
    if not 0 < beta_t < alpha_t:
        raise ValueError(f"need 0 < beta_t < alpha_t, got {beta_t}, {alpha_t}")
    codes = vg_binary_code(I * R, seed)
    return PackingSet(codes, I, N, R, beta_t, alpha_t, epsilon)


@dataclass(frozen=True)
class PackingReport:
    cardinality: int
    cardinality_ok: bool
    entries_ok: bool
    min_distance: float
    max_distance: float
    spacing_ok: bool
    max_block_rank: int
    rank_ok: bool

    @property
    def all_ok(self) -> bool:
        return self.cardinality_ok and self.entries_ok and self.spacing_ok and self.rank_ok


def pairwise_distances(ps: PackingSet) -> np.ndarray:
    """Exhaustive pairwise Frobenius distances between materializable
    elements, computed from the block matrices (exact: extra modes replicate
    every squared difference I^(N-2) times)."""
    mats = [ps.block_matrix(k) for k in range(ps.cardinality)]
    scale = float(ps.I) ** (ps.N - 2)
    out = []
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            d2 = float(np.sum((mats[i] - mats[j]) ** 2)) * scale
            out.append(math.sqrt(d2))
    return np.array(out)


def verify_packing(ps: PackingSet, tol: float = 1e-9) -> PackingReport:
    """Exhaustively check cardinality, entry range, pairwise spacing, and the
    rank of every block matrix."""
    need = 2.0 ** (ps.I * ps.R / 8.0)
    dists = pairwise_distances(ps)
    entries_ok = True
    max_rank = 0
    for k in range(ps.cardinality):
        a = ps.block_matrix(k)
        entries_ok &= bool(np.all(a >= ps.beta_t - tol) and np.all(a <= ps.alpha_t + tol))
        max_rank = max(max_rank, int(np.linalg.matrix_rank(a)))
    return PackingReport(
        cardinality=ps.cardinality,
        cardinality_ok=ps.cardinality >= need,
        entries_ok=entries_ok,
        min_distance=float(dists.min()),
        max_distance=float(dists.max()),
        spacing_ok=bool(
            dists.min() >= ps.separation - tol and dists.max() <= ps.spacing_upper + tol
        ),
        max_block_rank=max_rank,
        rank_ok=max_rank <= ps.R,
    )


# ---------------------------------------------------------------------------
# KL divergence and the bound
# ---------------------------------------------------------------------------

def poisson_kl(mi: DenseTensor, mj: DenseTensor) -> float:
    """KL divergence between entrywise-independent Poisson tensors:
    sum_k mi log(mi/mj) - mi + mj."""
    if mi.dims != mj.dims:
        raise ValueError(f"dimension mismatch: {mi.dims} vs {mj.dims}")
    p, q = mi.ravel(), mj.ravel()
    if not (np.all(p > 0) and np.all(q > 0)):
        raise ValueError("KL needs strictly positive rate tensors")
    return float(np.sum(p * (np.log(p) - np.log(q)) - p + q))


def max_pairwise_kl(ps: PackingSet) -> float:
    """Largest KL divergence over ordered pairs of packing elements,
    computed on the block matrices times the I^(N-2) replication factor."""
    mats = [ps.block_matrix(k) for k in range(ps.cardinality)]
    scale = float(ps.I) ** (ps.N - 2)
    worst = 0.0
    for i, a in enumerate(mats):
        for j, b in enumerate(mats):
            if i == j:
                continue
            kl = float(np.sum(a * (np.log(a) - np.log(b)) - a + b)) * scale
            worst = max(worst, kl)
    return worst


def kl_upper_bound(ps: PackingSet) -> float:
    """gamma = eps^2 (alpha_t - beta_t)^2 I^N / beta_t, the Fano-chain cap."""
    return ps.step**2 * float(ps.I) ** ps.N / ps.beta_t


def choose_epsilon(I: int, N: int, R: int, beta_t: float, alpha_t: float) -> float:
    """Largest epsilon in (0, 1] with
    eps^2 <= (IR/16 - 1)/I^N * beta_t log2 / (alpha_t - beta_t)^2."""
    if I * R <= 16:
        raise ValueError(f"need I*R > 16, got {I * R}")
    if not 0 < beta_t < alpha_t:
        raise ValueError(f"need 0 < beta_t < alpha_t, got {beta_t}, {alpha_t}")
    rhs = (I * R / 16.0 - 1.0) / float(I) ** N * beta_t * math.log(2.0) / (alpha_t - beta_t) ** 2
    eps = min(1.0, math.sqrt(rhs))
    if not eps > 0:
        raise ValueError("no positive epsilon exists for these parameters")
    return eps


def minimax_preconditions(
    I: int, R: int, beta_t: float, alpha_t: float, N: int
) -> dict[str, bool]:
    """Named checks required by the lower bound, each reported individually."""
    checks = {
        "R <= I": R <= I,
        "IR > 16": I * R > 16,
        "0 < beta_t < alpha_t": 0 < beta_t < alpha_t,
    }
    if checks["IR > 16"] and checks["0 < beta_t < alpha_t"]:
        lhs = (I * R / 16.0 - 1.0) * beta_t * math.log(2.0) / (alpha_t - beta_t) ** 2
        checks["(IR/16 - 1) beta_t log2 / (alpha_t - beta_t)^2 <= I^N"] = (
            lhs <= float(I) ** N
        )
    else:
        checks["(IR/16 - 1) beta_t log2 / (alpha_t - beta_t)^2 <= I^N"] = False
    return checks


def minimax_lower_bound(I: int, R: int, beta_t: float, alpha_t: float, N: int) -> float:
    """(beta_t log2 / 128) (IR/16 - 1); raises naming each failed precondition."""
    checks = minimax_preconditions(I, R, beta_t, alpha_t, N)
    failed = [name for name, ok in checks.items() if not ok]
    if failed:
        raise ValueError("minimax preconditions failed: " + "; ".join(failed))
    return beta_t * math.log(2.0) / 128.0 * (I * R / 16.0 - 1.0)
