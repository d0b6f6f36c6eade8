import math

import numpy as np
import pytest

from sparseperm.assign import assignment_objective, build_cost_matrix
from sparseperm.core import Dataset, FitConfig, PriorConfig, RegressionState
from sparseperm.engine import (
    Draws,
    gibbs_fit,
    initial_state,
    mcem_fit,
    pi_mean,
    posterior_l2_distance,
    summarize,
)
from sparseperm.hmc import HmcDiagnostics


def clean_data(n=50, d=2, sigma=0.5, seed=0):
    rng = np.random.default_rng(seed)
    beta = np.array([1.5, -0.7, 0.4, 2.0][:d])
    X = rng.normal(size=(n, d))
    return Dataset(X @ beta + sigma * rng.normal(size=n), X), beta


def fake_draws(beta, sigma2, perm):
    beta = np.asarray(beta, dtype=float)
    return Draws(beta, np.asarray(sigma2, dtype=float), np.asarray(perm, dtype=np.int64), HmcDiagnostics(),
                 1.0, 0.1, 0.0, 1.0)


def test_clean_data_posterior():
    # high signal-to-noise: with a uniform prior over all permutations, rows whose
    # fitted values lie within about sigma of each other swap freely
    data, beta = clean_data(sigma=0.001)
    draws = gibbs_fit(data, FitConfig(alpha=1.0, gibbs_iters=600, seed=1))
    s = summarize(draws)
    sd = draws.beta.std(axis=0)
    assert np.all(np.abs(s.beta_mean - beta) < 3 * sd)
    assert np.trace(s.pi_mean) / data.n > 0.95
    assert np.all(s.beta_ci[:, 0] <= s.beta_mean) and np.all(s.beta_mean <= s.beta_ci[:, 1])
    assert 0.3 < draws.hmc.accept_rate <= 1.0


def test_gibbs_is_deterministic_given_seed():
    data, _ = clean_data(n=30)
    cfg = FitConfig(alpha=0.5, gibbs_iters=60, seed=123)
    a, b = gibbs_fit(data, cfg), gibbs_fit(data, cfg)
    np.testing.assert_array_equal(a.beta, b.beta)
    np.testing.assert_array_equal(a.sigma2, b.sigma2)
    np.testing.assert_array_equal(a.perm, b.perm)
    c = gibbs_fit(data, FitConfig(alpha=0.5, gibbs_iters=60, seed=124))
    assert not np.array_equal(a.beta, c.beta)


def test_thinning_and_trace_lengths():
    data, _ = clean_data(n=20)
    draws = gibbs_fit(data, FitConfig(alpha=1.0, gibbs_iters=41, warmup_iters=10, thin=4))
    assert len(draws) == 8
    assert draws.perm.shape == (8, 20)


def test_bounded_fit_stays_in_support():
    rng = np.random.default_rng(2)
    X = rng.normal(size=(25, 2))
    y = rng.normal(size=25)  # pure noise pulls the permutation around
    draws = gibbs_fit(Dataset(y, X), FitConfig(alpha=1.0, gibbs_iters=60, priors=PriorConfig(k_bound=3)))
    assert max(np.count_nonzero(p != np.arange(25)) for p in draws.perm) <= 3


def test_identity_support_reduces_to_conjugate_regression():
    # with k_bound=0 the permutation is fixed; given sigma2 the beta posterior is Gaussian,
    # so the draws' mean and covariance must match the Rao-Blackwellised conjugate moments
    data, _ = clean_data(n=40, d=2, sigma=0.5, seed=3)
    vb = 1000.0
    cfg = FitConfig(alpha=1.0, gibbs_iters=8000, warmup_iters=500, priors=PriorConfig(k_bound=0), seed=4)
    draws = gibbs_fit(data, cfg)
    assert np.all(draws.perm == np.arange(data.n))
    XtX, Xty = data.X.T @ data.X, data.X.T @ data.y
    means, covs = [], []
    for s2 in draws.sigma2:
        cov = np.linalg.inv(XtX / s2 + np.eye(2) / vb)
        covs.append(cov)
        means.append(cov @ Xty / s2)
    means, covs = np.array(means), np.array(covs)
    rb_mean = means.mean(axis=0)
    rb_cov = covs.mean(axis=0) + np.cov(means.T, bias=True)

    def bm_se(x, k=40):
        m = x.size // k
        return x[: m * k].reshape(k, m).mean(axis=1).std(ddof=1) / math.sqrt(k)

    for j in range(2):
        assert abs(draws.beta[:, j].mean() - rb_mean[j]) < 3 * bm_se(draws.beta[:, j] - means[:, j])
    c = draws.beta - draws.beta.mean(axis=0)
    for i in range(2):
        for j in range(2):
            prod = c[:, i] * c[:, j]
            assert abs(prod.mean() - rb_cov[i, j]) < 3 * bm_se(prod)


def test_initial_state_is_ridge_fit():
    data, beta = clean_data(n=200, sigma=0.1)
    st = initial_state(data, FitConfig())
    np.testing.assert_allclose(st.beta, beta, atol=0.05)
    assert st.sigma2 == pytest.approx(0.01, rel=0.3)


# --------------------------------------------------------------------------- #
# summaries
# --------------------------------------------------------------------------- #


def test_summarize_single_draw():
    s = summarize(fake_draws([[1.0, 2.0]], [0.5], [[1, 0, 2]]))
    np.testing.assert_array_equal(s.beta_mean, [1.0, 2.0])
    np.testing.assert_array_equal(s.beta_ci, [[1.0, 1.0], [2.0, 2.0]])
    assert s.n_draws == 1


def test_summarize_identity_trace():
    s = summarize(fake_draws(np.zeros((5, 1)), np.ones(5), np.tile(np.arange(4), (5, 1))),
                  reference=(np.zeros(1), np.arange(4)))
    np.testing.assert_array_equal(s.pi_mean, np.eye(4))
    assert s.metrics["entrywise_l1_pi"] == 0.0


def test_summarize_hand_built_trace():
    beta = [[1.0, 0.0], [2.0, 1.0], [6.0, -1.0]]
    perms = [[0, 1, 2], [1, 0, 2], [1, 0, 2]]
    s = summarize(fake_draws(beta, [1.0, 2.0, 3.0], perms), reference=([2.0, 0.0], [0, 1, 2]))
    np.testing.assert_allclose(s.beta_mean, [3.0, 0.0])
    assert s.sigma2_mean == 2.0
    expected_pi = np.array([[1 / 3, 2 / 3, 0], [2 / 3, 1 / 3, 0], [0, 0, 1]])
    np.testing.assert_allclose(s.pi_mean, expected_pi)
    # |3-2| and |0-0| averaged over d=2
    assert s.metrics["mean_abs_beta_error"] == pytest.approx(0.5)
    # four off-identity entries of 2/3
    assert s.metrics["entrywise_l1_pi"] == pytest.approx(8 / 3)
    assert s.metrics["entrywise_l1_pi_norm"] == pytest.approx(8 / 27)


def test_summarize_rejects_empty():
    with pytest.raises(ValueError):
        summarize(fake_draws(np.zeros((0, 1)), np.zeros(0), np.zeros((0, 3))))


def test_pi_mean_is_doubly_stochastic():
    rng = np.random.default_rng(5)
    trace = np.array([rng.permutation(9) for _ in range(37)])
    pm = pi_mean(trace)
    np.testing.assert_allclose(pm.sum(axis=0), 1.0, atol=1e-9)
    np.testing.assert_allclose(pm.sum(axis=1), 1.0, atol=1e-9)


def test_posterior_l2_distance():
    d = fake_draws([[3.0, 4.0], [0.0, 0.0]], [1.0, 1.0], [[0], [0]])
    assert posterior_l2_distance(d, [0.0, 0.0]) == pytest.approx(2.5)


# --------------------------------------------------------------------------- #
# MC-EM
# --------------------------------------------------------------------------- #


def test_mcem_identity_data_keeps_identity():
    data, _ = clean_data(n=40, sigma=1e-6, seed=6)
    res = mcem_fit(data, FitConfig(alpha=1.0, mode="mcem", seed=0))
    for perm in res.perms:
        np.testing.assert_array_equal(perm, np.arange(40))


def test_mcem_recovers_mild_permutation_at_high_snr():
    rng = np.random.default_rng(7)
    n, d = 40, 3
    beta = np.array([1.0, -2.0, 0.5])
    X = rng.normal(size=(n, d))
    y = X @ beta + 1e-6 * rng.normal(size=n)
    pi0 = np.arange(n)
    pi0[[3, 17]] = [17, 3]
    pi0[[5, 8, 30]] = [8, 30, 5]
    # y[i] is generated by X[i]; the observed design puts X[i] in row pi0^-1[i]
    X_obs = np.empty_like(X)
    X_obs[pi0] = X
    res = mcem_fit(Dataset(y, X_obs), FitConfig(alpha=1.0, mode="mcem", seed=1))
    np.testing.assert_array_equal(res.perm, pi0)
    assert res.converged
    np.testing.assert_allclose(res.state.beta, beta, atol=1e-3)


def test_mcem_objective_never_increases():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(30, 2))
    y = X @ np.array([1.0, 1.0]) + 0.3 * rng.normal(size=30)
    res = mcem_fit(Dataset(y, X), FitConfig(alpha=1.0, mode="mcem", mcem_max_iter=40,
                                            priors=PriorConfig(k_bound=4)))
    assert res.objectives
    for before, after in res.objectives:
        assert after <= before + 1e-9
    for perm in res.perms:
        assert np.count_nonzero(perm != np.arange(30)) <= 4


def test_mcem_objective_recorded_against_its_state():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(15, 2))
    data = Dataset(X @ np.ones(2) + 0.1 * rng.normal(size=15), X)
    res = mcem_fit(data, FitConfig(alpha=1.0, mode="mcem", mcem_max_iter=5))
    state = res.states[1]
    L = build_cost_matrix(data, RegressionState(state.beta, state.sigma2), 1.0, FitConfig().family)
    assert res.objectives[0][1] == pytest.approx(assignment_objective(L, res.perms[1]))
