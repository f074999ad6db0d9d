"""Rank-constrained shifted-Poisson maximum likelihood with bound constraints.

Fitting maximizes the shifted objective over factor entries restricted to a
box (either nonnegativity with a small positive floor, or an explicit
[beta, alpha] box), via limited-memory quasi-Newton with gradient projection
(scipy's L-BFGS-B, memory 10) and deterministic seeded restarts.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np
from scipy.optimize import minimize

from .likelihood import shifted_loglik
from .tensor_core import (
    CpModel,
    DenseTensor,
    cp_reconstruct,
    flatten_theta,
    mttkrp,
    unflatten_theta,
)

# Floor used by the nonnegativity constraint; keeps log1p arguments strictly
# above -1 and avoids exactly-zero factors degenerating rank-one terms.
NONNEG_FLOOR = 1e-10


@dataclass(frozen=True)
class FitOptions:
    rank: int
    constraint: str = "nonnegative"  # "nonnegative" | "box"
    box: tuple[float, float] | None = None
    floor: float = NONNEG_FLOOR
    max_iter: int = 500
    tol: float = 1e-8
    restarts: int = 1
    seed: int = 0
    init_interval: tuple[float, float] | None = None
    track_history: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.constraint not in ("nonnegative", "box"):
            raise ValueError(f"unknown constraint {self.constraint!r}")
        if self.constraint == "box":
            if self.box is None:
                raise ValueError("box constraint requires box=(beta, alpha)")
            lo, hi = self.box
            if not 0 < lo <= hi:
                raise ValueError(f"box must satisfy 0 < beta <= alpha, got {self.box}")

    @property
    def bounds(self) -> tuple[float, float | None]:
        if self.constraint == "box":
            return self.box  # type: ignore[return-value]
        return (self.floor, None)


@dataclass(frozen=True)
class FitResult:
    model: CpModel
    objective: float  # shifted log-likelihood at model, recomputed
    iterations: int
    converged: bool
    restart_index: int
    grad_inf_norm: float
    history: tuple[float, ...] | None = None
    max_bound_violation: float | None = None  # over tracked iterates


def _objective(theta: np.ndarray, x1: np.ndarray, dims, rank: int):
    model = unflatten_theta(theta, dims, rank)
    t = cp_reconstruct(model).data
    f = -np.sum(x1 * np.log1p(t) - (t + 1.0))
    neg_score = DenseTensor(1.0 - x1 / (t + 1.0))
    grad_mats = [mttkrp(neg_score, model, n) for n in range(len(dims))]
    grad = np.concatenate(
        [grad_mats[n][:, r] for r in range(rank) for n in range(len(dims))]
    )
    return f, grad


def _projected_gradient(theta, grad, lo: float, hi: float | None) -> np.ndarray:
    pg = grad.copy()
    at_lo = theta <= lo + 1e-12 * (1.0 + abs(lo))
    pg[at_lo] = np.minimum(pg[at_lo], 0.0)
    if hi is not None:
        at_hi = theta >= hi - 1e-12 * (1.0 + abs(hi))
        pg[at_hi] = np.maximum(pg[at_hi], 0.0)
    return pg


def fit_rank_r(x: DenseTensor, opts: FitOptions) -> FitResult:
    """Best local maximizer of the shifted objective across seeded restarts.

    Deterministic for fixed counts, seed, and options. Ties between restarts
    within 1e-12 of objective resolve to the lowest restart index. The
    converged flag records whether the projected-gradient infinity norm at
    the solution is <= tol * (1 + |objective|).
    """
    xv = x.ravel()
    if not np.all((xv >= 0) & (xv == np.floor(xv))):
        raise ValueError("counts must be nonnegative integers")
    dims, rank = x.dims, opts.rank
    n_params = rank * sum(dims)
    lo, hi = opts.bounds
    if opts.init_interval is not None:
        init_lo, init_hi = opts.init_interval
    else:
        init_lo, init_hi = max(lo, 1e-12), 1.0 if hi is None else hi
    x1 = x.data + 1.0

    best: dict | None = None
    for restart in range(opts.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([int(opts.seed), restart]))
        theta0 = rng.uniform(init_lo, init_hi, n_params)
        np.clip(theta0, lo, hi, out=theta0)

        history: list[float] = []
        violations: list[float] = []
        callback = None
        if opts.track_history:
            def callback(theta_k):
                history.append(-_objective(theta_k, x1, dims, rank)[0])
                over = 0.0 if hi is None else float(np.maximum(theta_k - hi, 0.0).max())
                violations.append(max(float(np.maximum(lo - theta_k, 0.0).max()), over))

        res = minimize(
            _objective,
            theta0,
            args=(x1, dims, rank),
            jac=True,
            method="L-BFGS-B",
            bounds=[(lo, hi)] * n_params,
            callback=callback,
            options=dict(maxiter=opts.max_iter, maxcor=10, ftol=1e-15, gtol=1e-12),
        )
        theta = np.clip(res.x, lo, hi)
        f, grad = _objective(theta, x1, dims, rank)
        objective = -f
        pg_inf = float(np.abs(_projected_gradient(theta, grad, lo, hi)).max())
        cand = dict(
            theta=theta,
            objective=objective if math.isfinite(objective) else -math.inf,
            iterations=int(res.nit),
            converged=math.isfinite(objective)
            and pg_inf <= opts.tol * (1.0 + abs(objective)),
            restart=restart,
            pg_inf=pg_inf,
            history=tuple(history) if opts.track_history else None,
            violation=max(violations) if violations else None,
        )
        if best is None or cand["objective"] > best["objective"] + 1e-12:
            best = cand

    assert best is not None
    model = unflatten_theta(best["theta"], dims, rank)
    return FitResult(
        model=model,
        objective=shifted_loglik(x, cp_reconstruct(model)),
        iterations=best["iterations"],
        converged=bool(best["converged"]),
        restart_index=best["restart"],
        grad_inf_norm=best["pg_inf"],
        history=best["history"],
        max_bound_violation=best["violation"],
    )


# ---------------------------------------------------------------------------
# Normalization and alignment
# ---------------------------------------------------------------------------

def _equalize(model: CpModel, norm, nonneg: bool):
    new_factors = [f.copy() for f in model.factors]
    scales = np.empty(model.rank)
    for r in range(model.rank):
        norms = np.array([norm(f[:, r]) for f in new_factors])
        if np.any(norms == 0.0):
            raise ValueError(f"component {r} has a zero factor vector")
        if nonneg and any(np.any(f[:, r] < 0) for f in new_factors):
            raise ValueError(f"component {r} has negative entries")
        g = math.exp(np.mean(np.log(norms)))
        for n, f in enumerate(new_factors):
            f[:, r] *= g / norms[n]
        scales[r] = g
    return CpModel(tuple(new_factors)), scales


def equalize_l2(model: CpModel) -> CpModel:
    """Rescale each component so all its mode vectors share one l2 norm (the
    geometric mean of the originals); the reconstruction is unchanged."""
    return _equalize(model, np.linalg.norm, nonneg=False)[0]


def equalize_l1(model: CpModel) -> tuple[CpModel, np.ndarray]:
    """Per-component equal l1 norms (equal sums across modes) for nonnegative
    factors; returns the model and the common sum lambda_r per component."""
    return _equalize(model, lambda v: float(np.sum(np.abs(v))), nonneg=True)


def _component_matrix(model: CpModel) -> np.ndarray:
    # column r = stacked factor vectors of component r
    return np.concatenate([f for f in model.factors], axis=0)


def align_components(est: CpModel, truth: CpModel) -> CpModel:
    """Permute est's components to minimize the total squared distance to
    truth's, exactly for R <= 8 and greedily above."""
    if est.dims != truth.dims or est.rank != truth.rank:
        raise ValueError("models must share dims and rank to be aligned")
    R = est.rank
    if R == 1:
        return est
    E, T = _component_matrix(est), _component_matrix(truth)
    cost = (
        (E * E).sum(axis=0)[:, None]
        + (T * T).sum(axis=0)[None, :]
        - 2.0 * E.T @ T
    )
    if R <= 8:
        perm = min(
            permutations(range(R)),
            key=lambda p: sum(cost[p[s], s] for s in range(R)),
        )
    else:
        perm_arr = np.full(R, -1)
        work = cost.copy()
        for _ in range(R):
            i, j = np.unravel_index(np.argmin(work), work.shape)
            perm_arr[j] = i
            work[i, :] = np.inf
            work[:, j] = np.inf
        perm = tuple(perm_arr)
    return CpModel(tuple(f[:, list(perm)] for f in est.factors))


def factor_mse(est: CpModel, truth: CpModel) -> float:
    """Squared distance between the stacked parameter vectors; call this on
    equalized (and, for R > 1, aligned) models."""
    if est.dims != truth.dims or est.rank != truth.rank:
        raise ValueError("models must share dims and rank")
    d = flatten_theta(est) - flatten_theta(truth)
    return float(np.dot(d, d))
