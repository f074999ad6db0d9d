"""Dense N-way tensors and the CP (sum of rank-one outer products) algebra.

Everything downstream builds on two containers: a row-major dense tensor and
a CP model stored as per-mode factor matrices with one column per component.
Both are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np
from scipy.linalg import khatri_rao

# Dense allocations above this many entries are refused unless the guard is
# lifted; the large end of the experiment grid (I=100, N=4) sits just below it.
DEFAULT_ENTRY_CAP = 200_000_000

_entry_cap: float = DEFAULT_ENTRY_CAP


class EntryCapExceeded(MemoryError):
    """A dense tensor allocation would exceed the configured entry cap."""


def set_entry_cap(cap: int | None) -> None:
    """Set the dense-allocation guard; ``None`` disables it."""
    global _entry_cap
    _entry_cap = math.inf if cap is None else int(cap)


def get_entry_cap() -> float:
    return _entry_cap


def check_entry_cap(n_entries: int) -> None:
    if n_entries > _entry_cap:
        raise EntryCapExceeded(
            f"refusing to allocate {n_entries} entries (cap {_entry_cap:g}); "
            "raise the cap explicitly for large runs"
        )


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class DenseTensor:
    """Dense N-way array (N >= 2) in row-major order.

    Takes ownership of ``data``: the array is coerced to contiguous float64
    and marked read-only.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim < 2:
            raise ValueError(f"tensor order must be >= 2, got shape {arr.shape}")
        if any(d < 1 for d in arr.shape):
            raise ValueError(f"all dimensions must be positive, got {arr.shape}")
        check_entry_cap(arr.size)
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def order(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def ravel(self) -> np.ndarray:
        """Flat row-major view of the entries."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class CpModel:
    """Rank-R CP model: ``factors[n]`` has shape (I_n, R), column r holding
    the mode-n vector of component r."""

    factors: tuple[np.ndarray, ...]

    def __post_init__(self):
        mats = tuple(_freeze(f) for f in self.factors)
        if len(mats) < 2:
            raise ValueError("a CP model needs at least 2 modes")
        if any(f.ndim != 2 for f in mats):
            raise ValueError("each factor must be a 2-D (dim, rank) matrix")
        ranks = {f.shape[1] for f in mats}
        if len(ranks) != 1:
            raise ValueError(f"factor matrices disagree on rank: {sorted(ranks)}")
        if mats[0].shape[1] < 1:
            raise ValueError("rank must be positive")
        object.__setattr__(self, "factors", mats)

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.shape[0] for f in self.factors)

    @property
    def dim(self) -> int:
        """Common mode size I; only defined for cubical models."""
        dims = set(self.dims)
        if len(dims) != 1:
            raise ValueError(f"model is not cubical: dims {self.dims}")
        return dims.pop()

    def component(self, r: int) -> "CpModel":
        """Rank-one model holding component r only."""
        return CpModel(tuple(f[:, r : r + 1] for f in self.factors))

    def with_factors(self, factors) -> "CpModel":
        return CpModel(tuple(factors))


def from_vectors(vectors) -> CpModel:
    """Rank-one model from one vector per mode."""
    return CpModel(tuple(np.asarray(v, dtype=np.float64).reshape(-1, 1) for v in vectors))


# ---------------------------------------------------------------------------
# CP algebra
# ---------------------------------------------------------------------------

def cp_reconstruct(model: CpModel) -> DenseTensor:
    """Dense tensor with entries sum_r  prod_n factors[n][i_n, r]."""
    dims = model.dims
    check_entry_cap(int(np.prod(dims)))
    if model.order == 2:
        a, b = model.factors
        return DenseTensor(a @ b.T)
    kr = reduce(khatri_rao, model.factors[1:])
    return DenseTensor((model.factors[0] @ kr.T).reshape(dims))


def frobenius_norm(t: DenseTensor) -> float:
    return float(np.linalg.norm(t.ravel()))


def inner_product(a: DenseTensor, b: DenseTensor) -> float:
    if a.dims != b.dims:
        raise ValueError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return float(np.dot(a.ravel(), b.ravel()))


def mttkrp(t: DenseTensor, model: CpModel, mode: int) -> np.ndarray:
    """Matricized-tensor times Khatri-Rao product along ``mode``.

    Returns the (I_mode, R) matrix with entry (j, r) equal to
    sum over multi-indices i with i_mode = j of
    t[i] * prod_{p != mode} factors[p][i_p, r].
    """
    if not 0 <= mode < model.order:
        raise ValueError(f"mode {mode} out of range for order {model.order}")
    if t.dims != model.dims:
        raise ValueError(f"dimension mismatch: tensor {t.dims} vs model {model.dims}")
    rest = [model.factors[p] for p in range(model.order) if p != mode]
    kr = rest[0] if len(rest) == 1 else reduce(khatri_rao, rest)
    unfolding = np.moveaxis(t.data, mode, 0).reshape(t.dims[mode], -1)
    return unfolding @ kr


def flatten_theta(model: CpModel) -> np.ndarray:
    """Stack all factor vectors into one parameter vector.

    Component-major order: component r contributes its mode-1..N vectors
    contiguously, components in ascending r. Inverse of unflatten_theta.
    """
    R, N = model.rank, model.order
    return np.concatenate(
        [model.factors[n][:, r] for r in range(R) for n in range(N)]
    )


def unflatten_theta(theta: np.ndarray, dims: tuple[int, ...], rank: int) -> CpModel:
    theta = np.asarray(theta, dtype=np.float64)
    expected = rank * sum(dims)
    if theta.size != expected:
        raise ValueError(f"theta has length {theta.size}, expected {expected}")
    per_comp = sum(dims)
    factors = []
    offsets = np.cumsum((0,) + dims[:-1])
    for n, (I_n, off) in enumerate(zip(dims, offsets)):
        cols = [theta[r * per_comp + off : r * per_comp + off + I_n] for r in range(rank)]
        factors.append(np.stack(cols, axis=1))
    return CpModel(tuple(factors))


# ---------------------------------------------------------------------------
# Gram-Schmidt coefficient recovery
# ---------------------------------------------------------------------------

_REORTH_TRIGGER = 1e-8


def _orthogonal_residual(v: np.ndarray, basis: list[np.ndarray]) -> np.ndarray:
    """Residual of v against an orthonormal basis, with one re-orthogonalization
    pass when cancellation leaves less than _REORTH_TRIGGER of the input norm."""
    r = v.copy()
    for q in basis:
        r -= np.dot(q, r) * q
    if basis and np.linalg.norm(r) < _REORTH_TRIGGER * np.linalg.norm(v):
        for q in basis:
            r -= np.dot(q, r) * q
    return r


def gram_schmidt_coefficients(x: DenseTensor, components: list[DenseTensor]) -> np.ndarray:
    """Recover the coefficients a_r of x = sum_r a_r C_r for linearly
    independent components C_r, by orthogonalizing each component against
    the span of the others and projecting x onto the residual direction."""
    if not components:
        raise ValueError("need at least one component")
    vecs = [c.ravel() for c in components]
    if any(c.dims != x.dims for c in components):
        raise ValueError("component dimensions do not match the target tensor")
    xv = x.ravel()
    coeffs = np.empty(len(vecs))
    for r, v in enumerate(vecs):
        basis: list[np.ndarray] = []
        for s, w in enumerate(vecs):
            if s == r:
                continue
            res = _orthogonal_residual(w, basis)
            nrm = np.linalg.norm(res)
            if nrm == 0.0:
                raise ValueError("components are linearly dependent")
            basis.append(res / nrm)
        g = _orthogonal_residual(v, basis)
        denom = np.dot(v, g)
        if np.linalg.norm(g) <= 1e-12 * np.linalg.norm(v) or denom <= 0.0:
            raise ValueError("components are numerically linearly dependent")
        coeffs[r] = np.dot(xv, g) / denom
    return coeffs
