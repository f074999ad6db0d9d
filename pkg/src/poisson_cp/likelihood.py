"""Shifted-Poisson objective, its elementwise score/Hessian, and factor gradients.

The objective is L(x, t) = sum_i (x_i + 1) log(t_i + 1) - (t_i + 1), strictly
concave in every entry t_i. Solvers minimize -L; the sign flip happens at the
estimator boundary, everything here reports L itself.
"""

from __future__ import annotations

import numpy as np

from .tensor_core import CpModel, DenseTensor, cp_reconstruct, mttkrp


def _check_dims(a: DenseTensor, b: DenseTensor) -> None:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")


def shifted_loglik(x: DenseTensor, t: DenseTensor) -> float:
    """sum_i (x_i + 1) log1p(t_i) - (t_i + 1); requires t > -1 entrywise."""
    _check_dims(x, t)
    tv = t.ravel()
    if not np.all(tv > -1.0):
        raise ValueError("shifted log-likelihood needs every entry > -1")
    xv = x.ravel()
    return float(np.sum((xv + 1.0) * np.log1p(tv) - (tv + 1.0)))


def score_tensor(x: DenseTensor, m: DenseTensor) -> DenseTensor:
    """Elementwise score (x_i + 1)/(m_i + 1) - 1 of the shifted objective."""
    _check_dims(x, m)
    if not np.all(m.ravel() > -1.0):
        raise ValueError("score needs every rate entry > -1")
    return DenseTensor((x.data + 1.0) / (m.data + 1.0) - 1.0)


def hessian_diagonal(x: DenseTensor, mhat: DenseTensor) -> DenseTensor:
    """Diagonal of the (diagonal) Hessian: -(x_i + 1)/(mhat_i + 1)^2.

    The full I^N x I^N matrix is never materialized; off-diagonal terms are
    identically zero.
    """
    _check_dims(x, mhat)
    return DenseTensor(-(x.data + 1.0) / (mhat.data + 1.0) ** 2)


def factor_gradient(x: DenseTensor, model: CpModel) -> list[np.ndarray]:
    """Gradient of -shifted_loglik with respect to each factor matrix.

    One score pass plus N MTTKRP contractions: the mode-n gradient is the
    MTTKRP of the negated score tensor with the remaining factors.
    """
    t = cp_reconstruct(model)
    _check_dims(x, t)
    neg_score = DenseTensor(1.0 - (x.data + 1.0) / (t.data + 1.0))
    return [mttkrp(neg_score, model, n) for n in range(model.order)]


class ShiftedLoss:
    """Shifted objective bound to one count tensor, with a cached last value."""

    def __init__(self, counts: DenseTensor):
        cv = counts.ravel()
        if not np.all((cv >= 0) & (cv == np.floor(cv))):
            raise ValueError("counts must be nonnegative integers")
        self.counts = counts
        self.last_value: float | None = None

    def value(self, t: DenseTensor) -> float:
        self.last_value = shifted_loglik(self.counts, t)
        return self.last_value

    def score(self, m: DenseTensor) -> DenseTensor:
        return score_tensor(self.counts, m)

    def gradient(self, model: CpModel) -> list[np.ndarray]:
        return factor_gradient(self.counts, model)
