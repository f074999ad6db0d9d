import numpy as np
import pytest

from helpers import random_model
from poisson_cp.estimator import (
    FitOptions,
    align_components,
    equalize_l1,
    equalize_l2,
    factor_mse,
    fit_rank_r,
)
from poisson_cp.likelihood import shifted_loglik
from poisson_cp.sampling import GenConfig, gen_rank_r_model, sample_poisson_tensor
from poisson_cp.tensor_core import (
    CpModel,
    DenseTensor,
    cp_reconstruct,
    flatten_theta,
    from_vectors,
    frobenius_norm,
)


def test_noiseless_recovery_rank_one():
    # counts = rounded reconstruction of a large-rate model, so x ~ rates
    cfg = GenConfig(I=6, N=3, R=1, beta=400.0, alpha=600.0, seed=1)
    truth = gen_rank_r_model(cfg)
    rates = cp_reconstruct(truth)
    x = DenseTensor(np.round(rates.data))
    fit = fit_rank_r(x, FitOptions(rank=1, seed=0, init_interval=cfg.factor_interval))
    rel = frobenius_norm(
        DenseTensor(cp_reconstruct(fit.model).data - rates.data)
    ) / frobenius_norm(rates)
    assert rel < 0.01
    assert fit.converged


def test_symmetric_fixed_point():
    c = 5.0
    x = DenseTensor(np.full((2, 2), c))
    fit = fit_rank_r(x, FitOptions(rank=1, seed=3))
    assert np.allclose(cp_reconstruct(fit.model).data, c, rtol=1e-5)


def test_fit_determinism_bitwise():
    cfg = GenConfig(I=4, N=3, R=2, beta=1.0, alpha=2.0, seed=5)
    x = sample_poisson_tensor(cp_reconstruct(gen_rank_r_model(cfg)), seed=6)
    opts = FitOptions(rank=2, restarts=2, seed=17, init_interval=cfg.factor_interval)
    a, b = fit_rank_r(x, opts), fit_rank_r(x, opts)
    assert a.objective == b.objective
    assert a.iterations == b.iterations
    assert a.restart_index == b.restart_index
    for fa, fb in zip(a.model.factors, b.model.factors):
        assert np.array_equal(fa, fb)


def test_objective_recomputed_at_model():
    cfg = GenConfig(I=4, N=2, R=1, beta=1.0, alpha=2.0, seed=8)
    x = sample_poisson_tensor(cp_reconstruct(gen_rank_r_model(cfg)), seed=9)
    fit = fit_rank_r(x, FitOptions(rank=1, seed=0))
    assert fit.objective == pytest.approx(
        shifted_loglik(x, cp_reconstruct(fit.model)), rel=1e-14
    )


def test_objective_monotone_and_iterates_feasible():
    cfg = GenConfig(I=5, N=3, R=1, beta=1.0, alpha=2.0, seed=10)
    x = sample_poisson_tensor(cp_reconstruct(gen_rank_r_model(cfg)), seed=11)
    fit = fit_rank_r(x, FitOptions(rank=1, seed=2, track_history=True))
    hist = np.array(fit.history)
    assert hist.size >= 2
    drops = np.diff(hist)
    assert drops.min() >= -1e-9 * max(1.0, np.abs(hist).max())
    assert fit.max_bound_violation == 0.0


def test_solution_feasibility_nonneg_and_box():
    cfg = GenConfig(I=4, N=2, R=1, beta=1.0, alpha=2.0, seed=12)
    x = sample_poisson_tensor(cp_reconstruct(gen_rank_r_model(cfg)), seed=13)
    fit = fit_rank_r(x, FitOptions(rank=1, seed=0))
    assert all(f.min() >= FitOptions(rank=1).floor for f in fit.model.factors)

    lo, hi = 1.0, 2.0 ** (1.0 / 2.0)
    box_fit = fit_rank_r(
        x, FitOptions(rank=1, constraint="box", box=(lo, hi), seed=0)
    )
    for f in box_fit.model.factors:
        assert f.min() >= lo - 1e-12 and f.max() <= hi + 1e-12


def test_fit_rejects_non_counts():
    with pytest.raises(ValueError, match="nonnegative integers"):
        fit_rank_r(DenseTensor(np.full((2, 2), 0.3)), FitOptions(rank=1))


def test_fit_options_validation():
    with pytest.raises(ValueError):
        FitOptions(rank=0)
    with pytest.raises(ValueError):
        FitOptions(rank=1, max_iter=0)
    with pytest.raises(ValueError):
        FitOptions(rank=1, constraint="box")  # missing box
    with pytest.raises(ValueError):
        FitOptions(rank=1, constraint="simplex")


def test_restarts_reaching_equal_objectives_agree():
    cfg = GenConfig(I=4, N=3, R=1, beta=4.0, alpha=6.0, seed=21)
    x = sample_poisson_tensor(cp_reconstruct(gen_rank_r_model(cfg)), seed=22)
    fits = [
        fit_rank_r(x, FitOptions(rank=1, seed=s, init_interval=cfg.factor_interval))
        for s in (100, 200)
    ]
    if abs(fits[0].objective - fits[1].objective) < 1e-9:
        a, b = (equalize_l2(f.model) for f in fits)
        assert factor_mse(align_components(a, b), b) < 1e-6


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_equalize_l2_closed_form():
    model = from_vectors([np.array([2.0, 0.1]), np.array([0.5, 1.0])])
    out = equalize_l2(model)
    target = np.sqrt(np.linalg.norm([2.0, 0.1]) * np.linalg.norm([0.5, 1.0]))
    for f in out.factors:
        assert np.linalg.norm(f[:, 0]) == pytest.approx(target, rel=1e-12)
    assert np.allclose(cp_reconstruct(out).data, cp_reconstruct(model).data, rtol=1e-12)


def test_equalize_l2_idempotent():
    model = from_vectors([np.array([1.0, 1.0]), np.array([1.0, 1.0])])
    out = equalize_l2(model)
    for f, g in zip(model.factors, out.factors):
        assert np.allclose(f, g, rtol=1e-15)


def test_equalize_l2_reconstruction_invariance():
    rng = np.random.default_rng(3)
    model = random_model(rng, 4, 4, 3, lo=0.2, hi=3.0)
    before = cp_reconstruct(model)
    after = cp_reconstruct(equalize_l2(model))
    rel = frobenius_norm(DenseTensor(after.data - before.data)) / frobenius_norm(before)
    assert rel <= 1e-12


def test_equalize_l1_already_equal():
    model = from_vectors([np.ones(2), np.ones(2)])
    out, lams = equalize_l1(model)
    assert lams[0] == pytest.approx(2.0)
    for f, g in zip(model.factors, out.factors):
        assert np.allclose(f, g)


def test_equalize_l1_geometric_mean():
    model = from_vectors([np.array([1.0, 3.0]), np.array([2.0, 2.0])])
    out, lams = equalize_l1(model)
    assert lams[0] == pytest.approx(4.0, rel=1e-12)  # sums already equal
    model2 = from_vectors([np.array([1.0, 3.0]), np.array([1.0, 1.0])])
    out2, lams2 = equalize_l1(model2)
    assert lams2[0] == pytest.approx(np.sqrt(8.0), rel=1e-12)
    for f in out2.factors:
        assert f[:, 0].sum() == pytest.approx(np.sqrt(8.0), rel=1e-12)
    assert np.allclose(cp_reconstruct(out2).data, cp_reconstruct(model2).data, rtol=1e-12)


def test_equalize_errors():
    with pytest.raises(ValueError, match="zero"):
        equalize_l2(from_vectors([np.zeros(2), np.ones(2)]))
    with pytest.raises(ValueError, match="negative"):
        equalize_l1(from_vectors([np.array([1.0, -1.0]), np.ones(2)]))


# ---------------------------------------------------------------------------
# alignment and factor MSE
# ---------------------------------------------------------------------------

def test_align_undoes_swap():
    rng = np.random.default_rng(4)
    truth = random_model(rng, 3, 3, 2)
    swapped = CpModel(tuple(f[:, [1, 0]] for f in truth.factors))
    aligned = align_components(swapped, truth)
    for fa, ft in zip(aligned.factors, truth.factors):
        assert np.array_equal(fa, ft)


def test_align_rank_one_identity():
    rng = np.random.default_rng(5)
    est, truth = random_model(rng, 3, 2, 1), random_model(rng, 3, 2, 1)
    assert align_components(est, truth) is est


def test_align_matches_bruteforce_r3():
    from itertools import permutations

    rng = np.random.default_rng(6)
    truth = random_model(rng, 3, 3, 3)
    est = random_model(rng, 3, 3, 3)
    aligned = align_components(est, truth)
    best = min(
        permutations(range(3)),
        key=lambda p: factor_mse(
            CpModel(tuple(f[:, list(p)] for f in est.factors)), truth
        ),
    )
    assert factor_mse(aligned, truth) == pytest.approx(
        factor_mse(CpModel(tuple(f[:, list(best)] for f in est.factors)), truth)
    )


def test_align_greedy_path_runs():
    rng = np.random.default_rng(7)
    truth = random_model(rng, 2, 2, 9)
    shuffled = CpModel(tuple(f[:, list(np.roll(np.arange(9), 4))] for f in truth.factors))
    aligned = align_components(shuffled, truth)
    assert factor_mse(aligned, truth) <= factor_mse(shuffled, truth)


def test_factor_mse_identity_and_offset():
    rng = np.random.default_rng(8)
    truth = random_model(rng, 2, 2, 1)
    assert factor_mse(truth, truth) == 0.0
    h = 1e-3
    est = from_vectors([np.full(2, 1.0 + h), np.full(2, 1.0 + h)])
    base = from_vectors([np.ones(2), np.ones(2)])
    assert factor_mse(est, base) == pytest.approx(4 * h * h, rel=1e-12)


def test_factor_mse_matches_loop():
    rng = np.random.default_rng(9)
    a, b = random_model(rng, 3, 3, 2), random_model(rng, 3, 3, 2)
    want = float(np.sum((flatten_theta(a) - flatten_theta(b)) ** 2))
    assert factor_mse(a, b) == pytest.approx(want, rel=1e-12)


# ---------------------------------------------------------------------------
# factor-error transfer for equalized rank-one pairs
# ---------------------------------------------------------------------------

def _equalized_pair_in_interval(rng, I, N, lo=1.0, hi=2.0):
    while True:
        model = equalize_l2(
            CpModel(tuple(rng.uniform(lo + 0.05, hi - 0.05, (I, 1)) for _ in range(N)))
        )
        if all(f.min() >= lo and f.max() <= hi for f in model.factors):
            return model


def test_factor_error_transfer_bound():
    rng = np.random.default_rng(10)
    for _ in range(50):
        I, N = int(rng.integers(3, 9)), int(rng.integers(2, 5))
        a = _equalized_pair_in_interval(rng, I, N)
        b = _equalized_pair_in_interval(rng, I, N)
        eps = frobenius_norm(
            DenseTensor(cp_reconstruct(a).data - cp_reconstruct(b).data)
        ) ** 2
        bound = eps / (1.0 ** (2 * (N - 1)) * I ** (N - 1))
        for fa, fb in zip(a.factors, b.factors):
            assert np.sum((fa[:, 0] - fb[:, 0]) ** 2) <= bound + 1e-12
