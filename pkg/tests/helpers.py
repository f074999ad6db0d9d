"""Brute-force oracles shared by the test modules.

Everything here iterates explicit multi-index loops so it stays independent
of the vectorized library paths it is used to check.
"""

from itertools import product

import numpy as np

from poisson_cp.tensor_core import CpModel, DenseTensor


def random_model(rng, I, N, R, lo=0.5, hi=2.0) -> CpModel:
    return CpModel(tuple(rng.uniform(lo, hi, size=(I, R)) for _ in range(N)))


def random_tensor(rng, dims, lo=0.0, hi=1.0) -> DenseTensor:
    return DenseTensor(rng.uniform(lo, hi, size=dims))


def brute_reconstruct(model: CpModel) -> np.ndarray:
    """Entrywise sum over components of products of factor entries."""
    dims = model.dims
    out = np.zeros(dims)
    for idx in product(*(range(d) for d in dims)):
        total = 0.0
        for r in range(model.rank):
            term = 1.0
            for n, i in enumerate(idx):
                term *= model.factors[n][i, r]
            total += term
        out[idx] = total
    return out


def brute_mttkrp(t: DenseTensor, model: CpModel, mode: int) -> np.ndarray:
    dims = model.dims
    out = np.zeros((dims[mode], model.rank))
    for idx in product(*(range(d) for d in dims)):
        for r in range(model.rank):
            term = 1.0
            for n, i in enumerate(idx):
                if n != mode:
                    term *= model.factors[n][i, r]
            out[idx[mode], r] += t.data[idx] * term
    return out


def brute_inner(a: DenseTensor, b: DenseTensor) -> float:
    total = 0.0
    for idx in product(*(range(d) for d in a.dims)):
        total += a.data[idx] * b.data[idx]
    return total


def brute_shifted_loglik(x: DenseTensor, t: DenseTensor) -> float:
    total = 0.0
    for idx in product(*(range(d) for d in x.dims)):
        total += (x.data[idx] + 1.0) * np.log(t.data[idx] + 1.0) - (t.data[idx] + 1.0)
    return total


def dense_jacobian(model: CpModel) -> np.ndarray:
    """Full I^N x (R * sum dims) Jacobian of vec(reconstruction) w.r.t. the
    flattened parameters, component-major layout."""
    dims, N, R = model.dims, model.order, model.rank
    per_comp = sum(dims)
    offsets = np.cumsum([0] + list(dims))
    J = np.zeros((int(np.prod(dims)), R * per_comp))
    for row, idx in enumerate(product(*(range(d) for d in dims))):
        for r in range(R):
            for n in range(N):
                term = 1.0
                for p, i in enumerate(idx):
                    if p != n:
                        term *= model.factors[p][i, r]
                J[row, r * per_comp + offsets[n] + idx[n]] = term
    return J


def finite_difference_gradient(fun, theta: np.ndarray, step: float = 1e-5) -> np.ndarray:
    grad = np.zeros_like(theta)
    for k in range(theta.size):
        up = theta.copy()
        dn = theta.copy()
        up[k] += step
        dn[k] -= step
        grad[k] = (fun(up) - fun(dn)) / (2.0 * step)
    return grad
