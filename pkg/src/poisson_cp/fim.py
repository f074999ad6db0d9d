"""Fisher information for Poisson CP models and the pseudo-inverse trace bounds.

Two constructions of the same matrix: a closed-form block assembly for rank
one (diagonal blocks lam^(N-1) diag(u)^(-1), off-diagonal lam^(N-2) 11*, after
l1 equalization) and a general-rank Jacobian form J' diag(1/m) J accumulated
blockwise so the I^N x (NIR) Jacobian is never materialized. Surrogate
matrices F_b replace diag(u)^(-1) with b^(-1) I; their top (I-1)N+1
eigenvalues have closed forms, which define the trace bounds. For a general
lam the assembled surrogate also carries N-1 eigenvalues lam^(N-2)(lam/b - I)
outside that closed-form family, which is why surrogate traces use the
fixed-rank pseudo-inverse policy rather than a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor_core import CpModel, cp_reconstruct

# Eigenvalues below this fraction of the largest count as numerical zeros.
NUMERICAL_RANK_RTOL = 1e-8


@dataclass(frozen=True)
class RankPolicy:
    """Pseudo-inverse retention rule: keep a fixed count of leading
    eigenvalues, or all above a relative threshold."""

    kind: str  # "fixed" | "threshold"
    value: float

    @classmethod
    def fixed(cls, k: int) -> "RankPolicy":
        return cls("fixed", float(k))

    @classmethod
    def threshold(cls, rtol: float = NUMERICAL_RANK_RTOL) -> "RankPolicy":
        return cls("threshold", float(rtol))

    def describe(self) -> str:
        if self.kind == "fixed":
            return f"fixed-rank {int(self.value)}"
        return f"threshold {self.value:g}*max"


def default_policy(rank: int, dims: tuple[int, ...]) -> RankPolicy:
    """Fixed rank sum(I_n - 1) + 1 for rank one (the proven FIM rank);
    relative threshold otherwise (rank-R null space uncharacterized)."""
    if rank == 1:
        return RankPolicy.fixed(sum(d - 1 for d in dims) + 1)
    return RankPolicy.threshold()


@dataclass(frozen=True)
class FimResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray  # descending
    numerical_rank: int
    pinv_trace: float
    policy: RankPolicy
    lam: float | None = None  # common l1 norm, rank-one closed form only

    def __post_init__(self):
        for name in ("matrix", "eigenvalues"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)


def eigenvalue_trace(eigenvalues: np.ndarray, policy: RankPolicy) -> float:
    """Sum of reciprocals of the retained eigenvalues (descending input)."""
    ev = np.asarray(eigenvalues, dtype=np.float64)
    if policy.kind == "fixed":
        k = int(policy.value)
        if k > ev.size:
            raise ValueError(f"fixed rank {k} exceeds matrix size {ev.size}")
        kept = ev[:k]
        if kept.size and kept[-1] <= 0:
            raise ValueError("fixed rank extends into the nonpositive spectrum")
    else:
        kept = ev[ev > policy.value * max(ev[0], 0.0)] if ev.size else ev
    return float(np.sum(1.0 / kept))


def pinv_trace(fim: FimResult, policy: RankPolicy) -> float:
    """Pseudo-inverse trace of an already-decomposed FIM under a policy."""
    return eigenvalue_trace(fim.eigenvalues, policy)


def _finish(matrix: np.ndarray, policy: RankPolicy, lam: float | None) -> FimResult:
    matrix = 0.5 * (matrix + matrix.T)
    ev = np.linalg.eigvalsh(matrix)[::-1]
    num_rank = int(np.sum(ev > NUMERICAL_RANK_RTOL * max(ev[0], 0.0)))
    return FimResult(
        matrix=matrix,
        eigenvalues=ev,
        numerical_rank=num_rank,
        pinv_trace=eigenvalue_trace(ev, policy),
        policy=policy,
        lam=lam,
    )


def fim_rank_one_closed_form(model: CpModel) -> FimResult:
    """Block-form FIM of a positive rank-one model with equal mode sums."""
    if model.rank != 1:
        raise ValueError(f"closed form needs a rank-one model, got R={model.rank}")
    vecs = [f[:, 0] for f in model.factors]
    if any(np.any(v <= 0) for v in vecs):
        raise ValueError("closed form needs strictly positive factors")
    sums = np.array([v.sum() for v in vecs])
    lam = float(sums.mean())
    if np.max(np.abs(sums - lam)) > 1e-10 * lam:
        raise ValueError(
            f"mode l1 norms differ beyond 1e-10 relative ({sums}); equalize first"
        )
    N = model.order
    blocks = [
        [
            lam ** (N - 1) * np.diag(1.0 / vecs[n])
            if n == q
            else lam ** (N - 2) * np.ones((vecs[n].size, vecs[q].size))
            for q in range(N)
        ]
        for n in range(N)
    ]
    return _finish(np.block(blocks), default_policy(1, model.dims), lam)


def _contract_except(w: np.ndarray, vectors, keep: set[int]) -> np.ndarray:
    """Contract every mode of w not in ``keep`` with the matching vector;
    remaining axes stay in increasing mode order."""
    out = w
    for p in sorted(set(range(w.ndim)) - keep, reverse=True):
        out = np.tensordot(out, vectors[p], axes=([p], [0]))
    return out


def fim_jacobian(model: CpModel) -> FimResult:
    """FIM over the flattened parameters, J' diag(1/m) J, assembled block by
    block from tensor contractions of the reciprocal rate tensor."""
    m = cp_reconstruct(model).data
    if not np.all(m > 0):
        raise ValueError("reconstructed rates must be strictly positive")
    w = 1.0 / m
    N, R, dims = model.order, model.rank, model.dims
    offsets = np.cumsum([0] + [d for d in dims])
    per_comp = int(offsets[-1])
    size = R * per_comp
    F = np.zeros((size, size))
    for r in range(R):
        for rp in range(r, R):
            had = [model.factors[p][:, r] * model.factors[p][:, rp] for p in range(N)]
            for n in range(N):
                for q in range(N):
                    if n == q:
                        block = np.diag(_contract_except(w, had, {n}))
                    else:
                        k = _contract_except(w, had, {n, q})
                        if n > q:
                            k = k.T
                        block = k * np.outer(
                            model.factors[n][:, rp], model.factors[q][:, r]
                        )
                    rows = slice(
                        r * per_comp + offsets[n], r * per_comp + offsets[n + 1]
                    )
                    cols = slice(
                        rp * per_comp + offsets[q], rp * per_comp + offsets[q + 1]
                    )
                    F[rows, cols] = block
                    if rp != r:
                        F[cols.start : cols.stop, rows.start : rows.stop] = block.T
    return _finish(F, default_policy(R, dims), None)


# ---------------------------------------------------------------------------
# Surrogate matrices and the trace bounds
# ---------------------------------------------------------------------------

def assemble_surrogate(I: int, N: int, b: float, lam: float) -> np.ndarray:
    """The NI x NI surrogate with b^(-1) I diagonal blocks at scale lam^(N-1)
    and lam^(N-2) all-ones off-diagonal blocks."""
    _check_surrogate_domain(I, N, b, lam)
    return np.block(
        [
            [
                (lam ** (N - 1) / b) * np.eye(I)
                if n == q
                else lam ** (N - 2) * np.ones((I, I))
                for q in range(N)
            ]
            for n in range(N)
        ]
    )


def surrogate_eigenvalues(I: int, N: int, b: float, lam: float) -> tuple[float, float]:
    """(Lambda_1, Lambda_r): the leading eigenvalue and the (I-1)N-fold one."""
    _check_surrogate_domain(I, N, b, lam)
    lead = lam ** (N - 1) * (1.0 / b + (N - 1) * I / lam)
    bulk = lam ** (N - 1) / b
    return lead, bulk


def surrogate_trace_closed_form(I: int, N: int, b: float, lam: float) -> float:
    """1/Lambda_1 + (I-1)N b / lam^(N-1), the fixed-rank pseudo-inverse trace
    of the surrogate over its top (I-1)N+1 eigenvalues."""
    lead, _ = surrogate_eigenvalues(I, N, b, lam)
    return 1.0 / lead + (I - 1) * N * b / lam ** (N - 1)


def surrogate_eigenvectors(I: int, N: int) -> np.ndarray:
    """Columns: the stacked all-ones vector, then per mode the I-1 vectors
    sum_{j<=k} e_j - k e_{k+1} placed in that mode's block. These are
    eigenvectors of every assembled surrogate (eigenvalues Lambda_1 then
    Lambda_r), (I-1)N+1 columns in total."""
    if I < 2 or N < 2:
        raise ValueError("need I >= 2 and N >= 2")
    cols = [np.ones(N * I)]
    for n in range(N):
        for k in range(1, I):
            v = np.zeros(N * I)
            v[n * I : n * I + k] = 1.0
            v[n * I + k] = -float(k)
            cols.append(v)
    return np.stack(cols, axis=1)


def _check_surrogate_domain(I, N, b, lam):
    if I < 2 or N < 2:
        raise ValueError("need I >= 2 and N >= 2")
    if not (b > 0 and lam > 0):
        raise ValueError("need b > 0 and lam > 0")


@dataclass(frozen=True)
class TraceBounds:
    """Closed-form trace bracket for tr(FIM^+) of rank-one models in
    [beta, alpha], plus the exact surrogate traces when lam is known."""

    lower: float
    upper: float
    surrogate_lower_exact: float | None = None  # tr F_beta^+
    surrogate_upper_exact: float | None = None  # tr F_alpha^+


def trace_bounds(
    I: int, N: int, beta: float, alpha: float, lam: float | None = None
) -> TraceBounds:
    """lower = beta (I-1) N / (alpha^(N-1) I^(N-1)),
    upper = alpha (1 + (I-1) N) / (beta^(N-1) I^(N-1))."""
    if I < 2 or N < 2:
        raise ValueError("need I >= 2 and N >= 2")
    if not 0 < beta <= alpha:
        raise ValueError(f"need 0 < beta <= alpha, got beta={beta} alpha={alpha}")
    lower = beta * (I - 1) * N / (alpha ** (N - 1) * I ** (N - 1))
    upper = alpha * (1 + (I - 1) * N) / (beta ** (N - 1) * I ** (N - 1))
    lo_exact = hi_exact = None
    if lam is not None:
        lo_exact = surrogate_trace_closed_form(I, N, beta, lam)
        hi_exact = surrogate_trace_closed_form(I, N, alpha, lam)
    return TraceBounds(lower, upper, lo_exact, hi_exact)


def psd_order_check(a: np.ndarray, b: np.ndarray, tol: float = 1e-10) -> bool:
    """True iff b - a is PSD up to tol * ||b - a||_2 (both symmetric)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("need two square matrices of equal size")
    for name, mat in (("a", a), ("b", b)):
        scale = max(1.0, float(np.abs(mat).max()))
        if np.abs(mat - mat.T).max() > tol * scale:
            raise ValueError(f"matrix {name} is asymmetric beyond tol")
    d = b - a
    ev = np.linalg.eigvalsh(0.5 * (d + d.T))
    norm = max(abs(ev[0]), abs(ev[-1]))
    if norm == 0.0:
        return True
    return bool(ev[0] >= -tol * norm)
