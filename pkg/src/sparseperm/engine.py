"""Gibbs sampler and MC-EM fit for regression with a sparsely permuted design."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import permchain
from .assign import assignment_objective, build_cost_matrix, log_weights, solve_assignment_bounded
from .core import (
    ALD,
    Dataset,
    FitConfig,
    Gaussian,
    RegressionState,
    TemperedTarget,
    check_loss,
    mismatch_metrics,
)
from .hmc import HmcDiagnostics, StepSizeAdapter, hmc_transition

log = logging.getLogger(__name__)


@dataclass
class Draws:
    beta: np.ndarray          # (m, d)
    sigma2: np.ndarray        # (m,)
    perm: np.ndarray          # (m, n) int64
    hmc: HmcDiagnostics
    perm_accept_rate: float
    step_size: float
    wall_time_per_iter: float
    alpha: float

    def __post_init__(self) -> None:
        m = self.beta.shape[0]
        if self.sigma2.shape[0] != m or self.perm.shape[0] != m:
            raise ValueError("traces must have equal length")

    def __len__(self) -> int:
        return self.beta.shape[0]


@dataclass
class PosteriorSummary:
    beta_mean: np.ndarray
    beta_ci: np.ndarray       # (d, 2): 2.5% and 97.5% quantiles
    sigma2_mean: float
    pi_mean: np.ndarray
    n_draws: int
    metrics: dict = field(default_factory=dict)


@dataclass
class McemResult:
    states: list
    perms: list
    objectives: list          # (objective of previous perm, objective of new perm) per sweep
    converged: bool
    iterations: int

    @property
    def state(self) -> RegressionState:
        return self.states[-1]

    @property
    def perm(self) -> np.ndarray:
        return self.perms[-1]


def initial_state(data: Dataset, cfg: FitConfig) -> RegressionState:
    """Ridge fit at the identity permutation and a matching scale estimate."""
    X, y = data.X, data.y
    lam = 1.0 / cfg.priors.beta_prior_var
    beta = np.linalg.solve(X.T @ X + lam * np.eye(data.d), X.T @ y)
    r = y - X @ beta
    if isinstance(cfg.family, ALD):
        scale = float(np.mean(check_loss(r, cfg.family.tau)))
        sigma2 = scale**2
    else:
        sigma2 = float(np.mean(r**2))
    return RegressionState(beta, max(sigma2, 1e-12))


def _initial_perm(data: Dataset, state: RegressionState, alpha: float, cfg: FitConfig) -> np.ndarray:
    L = build_cost_matrix(data, state, alpha, cfg.family)
    return solve_assignment_bounded(L, cfg.priors.k_bound)


def _rng(cfg: FitConfig, rng) -> np.random.Generator:
    return np.random.default_rng(cfg.seed) if rng is None else rng


def warmup_kernels() -> None:
    """Compile (or load from cache) the numeric kernels so that timed runs exclude it."""
    rng = np.random.default_rng(0)
    X = rng.standard_normal((4, 1))
    data = Dataset(X[:, 0] + 0.1 * rng.standard_normal(4), X)
    for family in (Gaussian(), ALD(0.5)):
        gibbs_fit(data, FitConfig(alpha=1.0, family=family, gibbs_iters=2, hmc_per_sweep=1), rng)


def gibbs_fit(data: Dataset, cfg: FitConfig, rng: np.random.Generator | None = None) -> Draws:
    """Alternate HMC on ``(beta, log sigma2) | perm`` with the permutation chain ``perm | beta, sigma2``."""
    rng = _rng(cfg, rng)
    n, d = data.n, data.d
    if n < 2:
        raise ValueError("need n >= 2")
    alpha = cfg.resolve_alpha(n)
    warmup = cfg.resolve_warmup()
    perm_steps = cfg.resolve_perm_steps(n)
    k_bound = cfg.priors.k_bound

    state = initial_state(data, cfg)
    perm = _initial_perm(data, state, alpha, cfg)
    q = state.to_unconstrained()
    adapter = StepSizeAdapter(cfg.hmc.step_size, cfg.hmc.target_accept)
    eps = cfg.hmc.step_size
    diag = HmcDiagnostics()

    kept = (cfg.gibbs_iters - warmup + cfg.thin - 1) // cfg.thin
    beta_tr = np.empty((kept, d))
    s2_tr = np.empty(kept)
    perm_tr = np.empty((kept, n), dtype=np.int64)
    n_checker = n_accept = 0
    j = 0

    t0 = time.perf_counter()
    for it in range(cfg.gibbs_iters):
        target = TemperedTarget.build(data, perm, alpha, cfg.family, cfg.priors)
        logp = target(q)[0]
        for _ in range(cfg.hmc_per_sweep):
            q, accepted, delta = hmc_transition(q, target, eps, cfg.hmc.n_leapfrog, rng, logp0=logp,
                                              jitter=cfg.hmc.jitter)
            if accepted:
                logp = target(q)[0]
            if it < warmup:
                adapter.update(delta)
                eps = adapter.eps
            else:
                diag.record(accepted, delta)
        if it == warmup - 1:
            eps = adapter.final_eps()

        cur = RegressionState.from_unconstrained(q)
        W = log_weights(build_cost_matrix(data, cur, alpha, cfg.family))
        res = permchain.run_chain(perm, W, perm_steps, k_bound, rng)
        perm = res.state.perm
        if it >= warmup:
            n_checker += res.n_checkerboard
            n_accept += res.n_accepted
            if (it - warmup) % cfg.thin == 0:
                beta_tr[j] = cur.beta
                s2_tr[j] = cur.sigma2
                perm_tr[j] = perm
                j += 1
    elapsed = time.perf_counter() - t0

    return Draws(
        beta=beta_tr,
        sigma2=s2_tr,
        perm=perm_tr,
        hmc=diag,
        perm_accept_rate=n_accept / n_checker if n_checker else 1.0,
        step_size=eps,
        wall_time_per_iter=elapsed / cfg.gibbs_iters,
        alpha=alpha,
    )


def mcem_fit(data: Dataset, cfg: FitConfig, rng: np.random.Generator | None = None) -> McemResult:
    """Mode-seeking variant: HMC refresh of ``(beta, sigma2)``, then ``perm`` <- exact assignment.

    The refreshed ``(beta, sigma2)`` is the mean of all HMC draws taken since
    the permutation last changed, so the Monte Carlo sample grows while the
    permutation is stable.  Stops once the permutation is unchanged and the
    relative change in ``beta`` falls below ``mcem_tol``.
    """
    rng = _rng(cfg, rng)
    n = data.n
    alpha = cfg.resolve_alpha(n)
    k_bound = cfg.priors.k_bound

    state = initial_state(data, cfg)
    perm = _initial_perm(data, state, alpha, cfg)
    q = state.to_unconstrained()
    # mode-seeking, not sampling: the step size keeps adapting every sweep
    adapter = StepSizeAdapter(cfg.hmc.step_size, cfg.hmc.target_accept)
    states, perms, objectives = [state], [perm], []
    converged = False
    acc_sum = np.zeros(q.size)
    acc_n = 0

    it = 0
    for it in range(1, cfg.mcem_max_iter + 1):
        target = TemperedTarget.build(data, perm, alpha, cfg.family, cfg.priors)
        n_acc = 0
        for _ in range(cfg.hmc_per_sweep):
            q, accepted, delta = hmc_transition(q, target, adapter.eps, cfg.hmc.n_leapfrog, rng,
                                              jitter=cfg.hmc.jitter)
            adapter.update(delta)
            n_acc += accepted
            acc_sum[:-1] += q[:-1]
            acc_sum[-1] += np.exp(q[-1])
            acc_n += 1
        new_state = RegressionState(acc_sum[:-1] / acc_n, acc_sum[-1] / acc_n)

        L = build_cost_matrix(data, new_state, alpha, cfg.family)
        new_perm = solve_assignment_bounded(L, k_bound)
        before, after = assignment_objective(L, perm), assignment_objective(L, new_perm)
        if after > before:
            # bounded solve is a relaxation; never trade down from a feasible incumbent
            new_perm, after = perm, before
        objectives.append((before, after))

        rel = np.linalg.norm(new_state.beta - state.beta) / max(np.linalg.norm(state.beta), 1e-300)
        same_perm = np.array_equal(new_perm, perm)
        if not same_perm:
            acc_sum[:] = 0.0
            acc_n = 0
        state, perm = new_state, new_perm
        states.append(state)
        perms.append(perm)
        if n_acc > 0 and same_perm and rel < cfg.mcem_tol:
            converged = True
            break

    if not converged:
        log.warning("MC-EM reached the iteration cap (%d) without converging", cfg.mcem_max_iter)
    return McemResult(states, perms, objectives, converged, it)


def pi_mean(perm_trace: np.ndarray) -> np.ndarray:
    """Average of the one-hot matrices of a permutation trace."""
    m, n = perm_trace.shape
    counts = np.zeros((n, n))
    rows = np.broadcast_to(np.arange(n), (m, n))
    np.add.at(counts, (rows.ravel(), perm_trace.ravel()), 1.0)
    return counts / m


def summarize(draws: Draws, reference: tuple | None = None, pi_target: np.ndarray | None = None) -> PosteriorSummary:
    """Posterior means, 95% intervals and, given ``(beta0, pi0)``, the error metrics."""
    if len(draws) == 0:
        raise ValueError("empty trace")
    beta_mean = draws.beta.mean(axis=0)
    beta_ci = np.quantile(draws.beta, [0.025, 0.975], axis=0).T
    pm = pi_mean(draws.perm)
    out = PosteriorSummary(beta_mean, beta_ci, float(draws.sigma2.mean()), pm, len(draws))
    if reference is not None:
        beta0, pi0 = reference
        n = pm.shape[0]
        _, l1 = mismatch_metrics(pm, pi0)
        out.metrics = {
            "mean_abs_beta_error": float(np.mean(np.abs(beta_mean - np.asarray(beta0)))),
            "entrywise_l1_pi": l1,
            "entrywise_l1_pi_norm": l1 / n**2,
        }
        if pi_target is not None:
            _, l1t = mismatch_metrics(pm, pi_target)
            out.metrics["entrywise_l1_pi_target"] = l1t
            out.metrics["entrywise_l1_pi_target_norm"] = l1t / n**2
    return out


def fit(data: Dataset, cfg: FitConfig, rng: np.random.Generator | None = None):
    return mcem_fit(data, cfg, rng) if cfg.mode == "mcem" else gibbs_fit(data, cfg, rng)


def posterior_l2_distance(draws: Draws, beta0) -> float:
    """Mean over draws of ``||beta - beta0||_2``."""
    return float(np.mean(np.linalg.norm(draws.beta - np.asarray(beta0), axis=1)))


__all__ = [
    "Draws",
    "McemResult",
    "PosteriorSummary",
    "fit",
    "gibbs_fit",
    "initial_state",
    "mcem_fit",
    "pi_mean",
    "posterior_l2_distance",
    "summarize",
    "warmup_kernels",
]
