import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import brute_inner, brute_mttkrp, brute_reconstruct, random_model, random_tensor
from poisson_cp.tensor_core import (
    CpModel,
    DenseTensor,
    EntryCapExceeded,
    cp_reconstruct,
    flatten_theta,
    from_vectors,
    frobenius_norm,
    get_entry_cap,
    gram_schmidt_coefficients,
    inner_product,
    mttkrp,
    set_entry_cap,
    unflatten_theta,
)

SMALL_GRID = [(I, N, R) for I in (2, 3, 4) for N in (2, 3, 4) for R in (1, 2, 4)]


# ---------------------------------------------------------------------------
# cp_reconstruct
# ---------------------------------------------------------------------------

def test_reconstruct_all_ones_rank_one():
    model = from_vectors([np.ones(2), np.ones(2)])
    assert np.array_equal(cp_reconstruct(model).data, np.ones((2, 2)))


def test_reconstruct_entry_formula():
    model = from_vectors([np.array([1.0, 2.0])] * 3)
    assert cp_reconstruct(model).data[1, 1, 1] == 8.0


def test_reconstruct_rank_two_all_twos():
    model = CpModel((np.ones((2, 2)), np.ones((2, 2))))
    expected = brute_reconstruct(model)
    assert np.array_equal(expected, 2.0 * np.ones((2, 2)))
    assert np.array_equal(cp_reconstruct(model).data, expected)


@pytest.mark.parametrize("I,N,R", SMALL_GRID)
def test_reconstruct_matches_bruteforce(I, N, R):
    rng = np.random.default_rng(I * 100 + N * 10 + R)
    model = random_model(rng, I, N, R)
    got = cp_reconstruct(model).data
    want = brute_reconstruct(model)
    assert np.allclose(got, want, rtol=1e-12, atol=0)


def test_reconstruct_multilinearity():
    rng = np.random.default_rng(0)
    model = random_model(rng, 3, 3, 2)
    c = 1.7
    scaled = [f.copy() for f in model.factors]
    scaled[1][:, 0] *= c
    scaled_model = CpModel(tuple(scaled))
    comp0 = cp_reconstruct(model.component(0)).data
    comp1 = cp_reconstruct(model.component(1)).data
    assert np.allclose(cp_reconstruct(scaled_model).data, c * comp0 + comp1, rtol=1e-12)


# ---------------------------------------------------------------------------
# norms and inner products
# ---------------------------------------------------------------------------

def test_frobenius_zero():
    assert frobenius_norm(DenseTensor(np.zeros((3, 3)))) == 0.0


def test_frobenius_all_ones():
    assert frobenius_norm(DenseTensor(np.ones((2, 2)))) == 2.0


def test_frobenius_matches_oracle():
    rng = np.random.default_rng(1)
    t = random_tensor(rng, (3, 3, 3), -1.0, 1.0)
    want = np.sqrt(sum(v * v for v in t.ravel()))
    assert frobenius_norm(t) == pytest.approx(want, rel=1e-12)


def test_inner_product_self_is_squared_norm():
    rng = np.random.default_rng(2)
    t = random_tensor(rng, (2, 3))
    assert inner_product(t, t) == pytest.approx(frobenius_norm(t) ** 2, rel=1e-12)


def test_inner_product_with_zeros():
    rng = np.random.default_rng(3)
    t = random_tensor(rng, (2, 2, 2))
    assert inner_product(t, DenseTensor(np.zeros((2, 2, 2)))) == 0.0


def test_inner_product_matches_loop_oracle():
    rng = np.random.default_rng(4)
    a = random_tensor(rng, (2, 2, 2), -2.0, 2.0)
    b = random_tensor(rng, (2, 2, 2), -2.0, 2.0)
    assert inner_product(a, b) == pytest.approx(brute_inner(a, b), rel=1e-12)


def test_inner_product_dim_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        inner_product(DenseTensor(np.ones((2, 2))), DenseTensor(np.ones((2, 3))))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    dims = tuple(rng.integers(2, 5, size=rng.integers(2, 4)))
    a = random_tensor(rng, dims, -3.0, 3.0)
    b = random_tensor(rng, dims, -3.0, 3.0)
    s = DenseTensor(a.data + b.data)
    assert frobenius_norm(s) <= frobenius_norm(a) + frobenius_norm(b) + 1e-12


# ---------------------------------------------------------------------------
# mttkrp
# ---------------------------------------------------------------------------

def test_mttkrp_counting_argument():
    I, N = 3, 3
    model = from_vectors([np.ones(I)] * N)
    t = cp_reconstruct(model)
    out = mttkrp(t, model, 0)
    assert np.allclose(out, I ** (N - 1) * np.ones((I, 1)))


def test_mttkrp_matrix_vector_case():
    rng = np.random.default_rng(5)
    model = from_vectors([rng.uniform(1, 2, 4), rng.uniform(1, 2, 3)])
    t = random_tensor(rng, (4, 3))
    out = mttkrp(t, model, 0)
    assert np.allclose(out[:, 0], t.data @ model.factors[1][:, 0], rtol=1e-12)


@pytest.mark.parametrize("I,N,R", SMALL_GRID)
def test_mttkrp_matches_loop_oracle(I, N, R):
    rng = np.random.default_rng(1000 + I * 100 + N * 10 + R)
    model = random_model(rng, I, N, R)
    t = random_tensor(rng, (I,) * N, -1.0, 1.0)
    for mode in range(N):
        got = mttkrp(t, model, mode)
        want = brute_mttkrp(t, model, mode)
        assert np.allclose(got, want, rtol=1e-10, atol=1e-12)


def test_mttkrp_mode_out_of_range():
    model = from_vectors([np.ones(2), np.ones(2)])
    t = cp_reconstruct(model)
    with pytest.raises(ValueError, match="mode"):
        mttkrp(t, model, 2)


def test_rectangular_dims_supported():
    rng = np.random.default_rng(11)
    model = CpModel(tuple(rng.uniform(0.5, 2.0, (d, 2)) for d in (2, 3, 4)))
    got = cp_reconstruct(model)
    assert got.dims == (2, 3, 4)
    assert np.allclose(got.data, brute_reconstruct(model), rtol=1e-12)
    t = random_tensor(rng, (2, 3, 4), -1.0, 1.0)
    for mode in range(3):
        assert np.allclose(
            mttkrp(t, model, mode), brute_mttkrp(t, model, mode), rtol=1e-10
        )


# ---------------------------------------------------------------------------
# theta flattening
# ---------------------------------------------------------------------------

def test_flatten_rank_one_example():
    model = from_vectors([np.array([1.0, 2.0]), np.array([3.0, 4.0])])
    assert np.array_equal(flatten_theta(model), [1.0, 2.0, 3.0, 4.0])


def test_flatten_length():
    rng = np.random.default_rng(6)
    model = random_model(rng, 4, 3, 2)
    assert flatten_theta(model).size == 24


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_flatten_roundtrip(seed):
    rng = np.random.default_rng(seed)
    I, N, R = rng.integers(2, 5), rng.integers(2, 4), rng.integers(1, 4)
    model = random_model(rng, int(I), int(N), int(R))
    back = unflatten_theta(flatten_theta(model), model.dims, model.rank)
    for a, b in zip(model.factors, back.factors):
        assert np.array_equal(a, b)


def test_unflatten_rejects_bad_length():
    with pytest.raises(ValueError, match="length"):
        unflatten_theta(np.ones(5), (2, 2), 1)


# ---------------------------------------------------------------------------
# Gram-Schmidt coefficient recovery
# ---------------------------------------------------------------------------

def _unit_positive_components(rng, I, N, R):
    comps = []
    for _ in range(R):
        t = cp_reconstruct(random_model(rng, I, N, 1, lo=0.2, hi=1.0))
        comps.append(DenseTensor(t.data / frobenius_norm(t)))
    return comps


def test_gram_schmidt_recovers_planted_coefficients():
    rng = np.random.default_rng(7)
    comps = _unit_positive_components(rng, 3, 3, 4)
    a = rng.uniform(0.2, 2.0, 4)
    x = DenseTensor(sum(ai * c.data for ai, c in zip(a, comps)))
    got = gram_schmidt_coefficients(x, comps)
    assert np.allclose(got, a, rtol=1e-9)


def test_gram_schmidt_coefficient_bounds():
    rng = np.random.default_rng(8)
    for _ in range(20):
        I, N, R = rng.integers(2, 5), rng.integers(2, 5), rng.integers(1, 6)
        comps = _unit_positive_components(rng, int(I), int(N), int(R))
        a = rng.uniform(0.2, 2.0, int(R))
        x = DenseTensor(sum(ai * c.data for ai, c in zip(a, comps)))
        got = gram_schmidt_coefficients(x, comps)
        norm = frobenius_norm(x)
        assert np.abs(got).max() <= norm + 1e-9
        assert np.abs(got).sum() <= R * norm + 1e-9


def test_gram_schmidt_nearly_dependent_components():
    # second component is a tiny perturbation of the first; recovery must
    # survive the re-orthogonalization path
    rng = np.random.default_rng(9)
    base = _unit_positive_components(rng, 3, 3, 1)[0]
    bump = rng.uniform(0, 1e-6, base.dims)
    second = DenseTensor((base.data + bump) / np.linalg.norm((base.data + bump).ravel()))
    a = np.array([1.3, 0.7])
    x = DenseTensor(a[0] * base.data + a[1] * second.data)
    got = gram_schmidt_coefficients(x, [base, second])
    assert np.allclose(got, a, rtol=1e-4)


def test_gram_schmidt_rejects_dependent():
    t = _unit_positive_components(np.random.default_rng(10), 2, 2, 1)[0]
    with pytest.raises(ValueError, match="dependent"):
        gram_schmidt_coefficients(t, [t, t])


# ---------------------------------------------------------------------------
# validation and the allocation guard
# ---------------------------------------------------------------------------

def test_tensor_requires_order_two():
    with pytest.raises(ValueError, match="order"):
        DenseTensor(np.ones(3))


def test_model_requires_consistent_rank():
    with pytest.raises(ValueError, match="rank"):
        CpModel((np.ones((2, 1)), np.ones((2, 2))))


def test_entry_cap_guard():
    old = get_entry_cap()
    set_entry_cap(10)
    try:
        with pytest.raises(EntryCapExceeded):
            DenseTensor(np.zeros((4, 4)))
        with pytest.raises(EntryCapExceeded):
            cp_reconstruct(from_vectors([np.ones(4), np.ones(4)]))
    finally:
        set_entry_cap(int(old))
    DenseTensor(np.zeros((4, 4)))  # fine again
