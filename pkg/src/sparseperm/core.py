"""Domain types, likelihood families and the tempered posterior density.

Conventions used throughout the package:

* A permutation is a 0-based integer array ``sigma`` of length ``n``.  Its
  matrix form has ``P[i, sigma[i]] = 1`` so that ``(P @ X)[i] == X[sigma[i]]``
  and response ``y[i]`` is modelled by covariate row ``sigma[i]``.
* The sampler works on the unconstrained vector ``q = (beta, log sigma2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numba
import numpy as np

from .hmc import HmcConfig

LOG_2PI = math.log(2.0 * math.pi)


# --------------------------------------------------------------------------- #
# Data and permutations
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class Dataset:
    """Observed (possibly mismatched) pairs: response ``y`` and design ``X``."""

    y: np.ndarray
    X: np.ndarray

    def __post_init__(self) -> None:
        y = np.array(self.y, dtype=float).reshape(-1)
        X = np.array(self.X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-d, got shape {X.shape}")
        if X.shape[0] != y.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has length {y.shape[0]}")
        if y.size == 0 or X.shape[1] == 0:
            raise ValueError("dataset must have n >= 1 and d >= 1")
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(X))):
            raise ValueError("dataset contains non-finite entries")
        y.flags.writeable = False
        X.flags.writeable = False
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]


def as_permutation(sigma, n: int | None = None) -> np.ndarray:
    """Validate ``sigma`` as a bijection on ``{0, ..., n-1}`` and return it as int64."""
    arr = np.asarray(sigma)
    if arr.ndim != 1:
        raise ValueError("permutation must be a 1-d index array")
    if arr.size and not np.issubdtype(arr.dtype, np.integer):
        if not np.all(arr == np.round(arr)):
            raise ValueError("permutation entries must be integers")
    arr = arr.astype(np.int64)
    if n is not None and arr.size != n:
        raise ValueError(f"permutation has length {arr.size}, expected {n}")
    m = arr.size
    if np.any(arr < 0) or np.any(arr >= m):
        raise ValueError("permutation entries out of range")
    if np.bincount(arr, minlength=m).max(initial=1) != 1:
        raise ValueError("permutation entries are not distinct")
    return arr


def identity_permutation(n: int) -> np.ndarray:
    return np.arange(n, dtype=np.int64)


def permutation_matrix(sigma) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.int64)
    n = sigma.size
    P = np.zeros((n, n))
    P[np.arange(n), sigma] = 1.0
    return P


def displaced_count(sigma) -> int:
    """Number of indices moved by ``sigma`` (Hamming distance to the identity)."""
    sigma = np.asarray(sigma)
    return int(np.count_nonzero(sigma != np.arange(sigma.size)))


# --------------------------------------------------------------------------- #
# Parameters and configuration
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class RegressionState:
    beta: np.ndarray
    sigma2: float

    def __post_init__(self) -> None:
        beta = np.array(self.beta, dtype=float).reshape(-1)
        sigma2 = float(self.sigma2)
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        if not (math.isfinite(sigma2) and sigma2 > 0):
            raise ValueError(f"sigma2 must be positive and finite, got {sigma2}")
        beta.flags.writeable = False
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "sigma2", sigma2)

    def to_unconstrained(self) -> np.ndarray:
        return np.append(self.beta, math.log(self.sigma2))

    @classmethod
    def from_unconstrained(cls, q: np.ndarray) -> "RegressionState":
        return cls(beta=q[:-1], sigma2=math.exp(q[-1]))


@dataclass(frozen=True)
class Gaussian:
    """Normal errors with variance ``sigma2``."""

    name = "gaussian"

    def logpdf(self, resid: np.ndarray, sigma2: float) -> np.ndarray:
        return -0.5 * (LOG_2PI + math.log(sigma2)) - resid**2 / (2.0 * sigma2)

    def cost(self, resid: np.ndarray, sigma2: float) -> np.ndarray:
        # assignment cost: squared residual over 2 sigma2, plus log sigma2
        return resid**2 / (2.0 * sigma2) + math.log(sigma2)

    def grad_terms(self, resid: np.ndarray, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
        """Per-observation d logpdf / d resid and d logpdf / d log(sigma2)."""
        d_resid = -resid / sigma2
        d_logs2 = -0.5 + resid**2 / (2.0 * sigma2)
        return d_resid, d_logs2


def check_loss(u: np.ndarray, tau: float) -> np.ndarray:
    """Quantile check function ``u * (tau - 1{u < 0})``."""
    u = np.asarray(u, dtype=float)
    return u * (tau - (u < 0))


@dataclass(frozen=True)
class ALD:
    """Asymmetric Laplace errors at quantile level ``tau``; scale is sqrt(sigma2)."""

    tau: float = 0.5
    name = "ald"

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must lie in (0, 1), got {self.tau}")

    def logpdf(self, resid: np.ndarray, sigma2: float) -> np.ndarray:
        scale = math.sqrt(sigma2)
        return math.log(self.tau * (1.0 - self.tau)) - math.log(scale) - check_loss(resid, self.tau) / scale

    def cost(self, resid: np.ndarray, sigma2: float) -> np.ndarray:
        scale = math.sqrt(sigma2)
        return check_loss(resid, self.tau) / scale + math.log(scale)

    def grad_terms(self, resid: np.ndarray, sigma2: float) -> tuple[np.ndarray, np.ndarray]:
        scale = math.sqrt(sigma2)
        # subgradient of the check loss, tau - 1/2 at exactly zero
        slope = np.where(resid > 0, self.tau, self.tau - 1.0)
        slope = np.where(resid == 0, self.tau - 0.5, slope)
        d_resid = -slope / scale
        d_logs2 = -0.5 + 0.5 * check_loss(resid, self.tau) / scale
        return d_resid, d_logs2


LikelihoodFamily = Union[Gaussian, ALD]


def family_from_name(name: str, tau: float = 0.5) -> LikelihoodFamily:
    key = name.strip().lower()
    if key in ("gaussian", "normal"):
        return Gaussian()
    if key in ("ald", "quantile"):
        return ALD(tau)
    raise ValueError(f"unknown likelihood family {name!r}")


@dataclass(frozen=True)
class PriorConfig:
    beta_prior_var: float = 1000.0
    sigma2_prior_var: float = 1000.0
    k_bound: int | None = None  # None means unbounded

    def __post_init__(self) -> None:
        if not (self.beta_prior_var > 0 and self.sigma2_prior_var > 0):
            raise ValueError("prior variances must be positive")
        if self.k_bound is not None and self.k_bound < 0:
            raise ValueError("k_bound must be non-negative")


@dataclass(frozen=True)
class FitConfig:
    """Sampler settings.

    ``alpha=None`` means the temperature ``1/n`` resolved against the data.
    ``warmup_iters=None`` discards the first half of ``gibbs_iters``;
    ``perm_chain_steps_per_gibbs=None`` uses ``ceil(n log n)``.
    """

    alpha: float | None = None
    family: LikelihoodFamily = field(default_factory=Gaussian)
    priors: PriorConfig = field(default_factory=PriorConfig)
    gibbs_iters: int = 1000
    warmup_iters: int | None = None
    perm_chain_steps_per_gibbs: int | None = None
    hmc_per_sweep: int = 5
    hmc: HmcConfig = field(default_factory=HmcConfig)
    seed: int = 0
    mode: str = "gibbs"
    thin: int = 1
    mcem_max_iter: int = 1000
    mcem_tol: float = 1e-6

    def __post_init__(self) -> None:
        if self.alpha is not None and not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.gibbs_iters < 1 or self.hmc_per_sweep < 1 or self.thin < 1 or self.mcem_max_iter < 1:
            raise ValueError("iteration counts must be >= 1")
        if self.warmup_iters is not None and not 0 <= self.warmup_iters < self.gibbs_iters:
            raise ValueError("warmup_iters must lie in [0, gibbs_iters)")
        if self.perm_chain_steps_per_gibbs is not None and self.perm_chain_steps_per_gibbs < 1:
            raise ValueError("perm_chain_steps_per_gibbs must be >= 1")
        if self.mode not in ("gibbs", "mcem"):
            raise ValueError(f"mode must be 'gibbs' or 'mcem', got {self.mode!r}")

    def resolve_alpha(self, n: int) -> float:
        return 1.0 / n if self.alpha is None else float(self.alpha)

    def resolve_warmup(self) -> int:
        return self.gibbs_iters // 2 if self.warmup_iters is None else self.warmup_iters

    def resolve_perm_steps(self, n: int) -> int:
        if self.perm_chain_steps_per_gibbs is not None:
            return self.perm_chain_steps_per_gibbs
        return max(1, math.ceil(n * math.log(n)))


# --------------------------------------------------------------------------- #
# Densities
# --------------------------------------------------------------------------- #


def residuals(data: Dataset, perm, beta) -> np.ndarray:
    return data.y - data.X[np.asarray(perm)] @ np.asarray(beta, dtype=float)


def log_likelihood(data: Dataset, perm, state: RegressionState, family: LikelihoodFamily) -> float:
    perm = as_permutation(perm, data.n)
    r = residuals(data, perm, state.beta)
    with np.errstate(over="ignore", invalid="ignore"):
        value = float(np.sum(family.logpdf(r, state.sigma2)))
    if not math.isfinite(value):
        raise ValueError("log-likelihood is not finite; sigma2 degenerate or overflow")
    return value


def log_prior_beta(beta: np.ndarray, var: float) -> float:
    beta = np.asarray(beta, dtype=float)
    return -0.5 * beta.size * (LOG_2PI + math.log(var)) - float(beta @ beta) / (2.0 * var)


def log_prior_sigma2(sigma2: float, var: float) -> float:
    """Half-normal log-density on sigma2 (normal(0, var) truncated to (0, inf))."""
    return math.log(2.0) - 0.5 * (LOG_2PI + math.log(var)) - sigma2**2 / (2.0 * var)


def in_support(perm, k_bound: int | None) -> bool:
    return k_bound is None or displaced_count(perm) <= k_bound


def log_fractional_target(data: Dataset, perm, state: RegressionState, cfg) -> float:
    """Tempered log posterior (up to a constant) in the (beta, sigma2) parameterization.

    ``cfg`` needs ``alpha`` (resolved against ``data.n``), ``family`` and ``priors``.
    Returns ``-inf`` when ``perm`` displaces more than ``k_bound`` indices.
    """
    alpha = cfg.resolve_alpha(data.n)
    if not in_support(perm, cfg.priors.k_bound):
        return -math.inf
    return (
        alpha * log_likelihood(data, perm, state, cfg.family)
        + log_prior_beta(state.beta, cfg.priors.beta_prior_var)
        + log_prior_sigma2(state.sigma2, cfg.priors.sigma2_prior_var)
    )


@dataclass(frozen=True)
class TemperedTarget:
    """Log-density and gradient over ``q = (beta, log sigma2)`` for one fixed permutation.

    Includes the log-Jacobian ``log sigma2`` of the change of variables, so this is
    the density HMC actually samples.  The permuted design is computed once.
    """

    y: np.ndarray
    Xp: np.ndarray
    alpha: float
    family: LikelihoodFamily
    priors: PriorConfig = field(default_factory=PriorConfig)

    @classmethod
    def build(cls, data: Dataset, perm, alpha: float, family: LikelihoodFamily, priors: PriorConfig):
        return cls(data.y, data.X[np.asarray(perm)], float(alpha), family, priors)

    def _args(self):
        fam, tau = (1, self.family.tau) if isinstance(self.family, ALD) else (0, 0.5)
        return (np.ascontiguousarray(self.y), np.ascontiguousarray(self.Xp), self.alpha, fam, tau,
                self.priors.beta_prior_var, self.priors.sigma2_prior_var)

    def __call__(self, q: np.ndarray) -> tuple[float, np.ndarray]:
        q = np.asarray(q, dtype=float)
        grad = np.empty_like(q)
        logp = _tempered_eval(q, grad, *self._args())
        return logp, grad

    def trajectory(self, q, p, eps: float, n_steps: int):
        """Compiled leapfrog path; same contract as the generic HMC trajectory."""
        q1 = np.array(q, dtype=float)
        p1 = np.array(p, dtype=float)
        logp = _tempered_trajectory(q1, p1, float(eps), int(n_steps), *self._args())
        return q1, p1, logp


LOG_S2_LIMIT = 300.0


@numba.njit(cache=True)
def _tempered_eval(q, grad, y, Xp, alpha, fam, tau, vb, vs):
    # fills grad in place and returns logp; -inf (grad nan) outside the finite domain
    d = q.shape[0] - 1
    log_s2 = q[d]
    if not (-LOG_S2_LIMIT < log_s2 < LOG_S2_LIMIT):
        grad[:] = np.nan
        return -np.inf
    s2 = math.exp(log_s2)
    n = y.shape[0]
    ll = 0.0
    dl = 0.0
    for j in range(d):
        grad[j] = 0.0
    if fam == 0:
        const = -0.5 * (LOG_2PI + log_s2)
        for i in range(n):
            r = y[i]
            for j in range(d):
                r -= Xp[i, j] * q[j]
            ll += const - r * r / (2.0 * s2)
            dl += -0.5 + r * r / (2.0 * s2)
            dr = -r / s2
            for j in range(d):
                grad[j] -= alpha * Xp[i, j] * dr
    else:
        scale = math.sqrt(s2)
        const = math.log(tau * (1.0 - tau)) - 0.5 * log_s2
        for i in range(n):
            r = y[i]
            for j in range(d):
                r -= Xp[i, j] * q[j]
            if r > 0.0:
                slope = tau
            elif r < 0.0:
                slope = tau - 1.0
            else:
                slope = tau - 0.5
            rho = r * (tau - 1.0) if r < 0.0 else r * tau
            ll += const - rho / scale
            dl += -0.5 + 0.5 * rho / scale
            dr = -slope / scale
            for j in range(d):
                grad[j] -= alpha * Xp[i, j] * dr
    bb = 0.0
    for j in range(d):
        bb += q[j] * q[j]
        grad[j] -= q[j] / vb
    logp = (alpha * ll
            - 0.5 * d * (LOG_2PI + math.log(vb)) - bb / (2.0 * vb)
            + math.log(2.0) - 0.5 * (LOG_2PI + math.log(vs)) - s2 * s2 / (2.0 * vs)
            + log_s2)
    grad[d] = alpha * dl - s2 * s2 / vs + 1.0
    return logp


@numba.njit(cache=True)
def _tempered_trajectory(q, p, eps, n_steps, y, Xp, alpha, fam, tau, vb, vs):
    # q and p are updated in place
    g = np.empty_like(q)
    logp = _tempered_eval(q, g, y, Xp, alpha, fam, tau, vb, vs)
    for _ in range(n_steps):
        p += 0.5 * eps * g
        q += eps * p
        logp = _tempered_eval(q, g, y, Xp, alpha, fam, tau, vb, vs)
        if not math.isfinite(logp):
            return -np.inf
        p += 0.5 * eps * g
    return logp


def grad_log_fractional_target(data: Dataset, perm, state: RegressionState, cfg) -> np.ndarray:
    """Gradient of the unconstrained tempered log-density w.r.t. ``(beta, log sigma2)``."""
    target = TemperedTarget.build(data, perm, cfg.resolve_alpha(data.n), cfg.family, cfg.priors)
    return target(state.to_unconstrained())[1]


# --------------------------------------------------------------------------- #
# Metrics
# --------------------------------------------------------------------------- #


def _as_matrix(a) -> tuple[np.ndarray, np.ndarray | None]:
    arr = np.asarray(a)
    if arr.ndim == 1:
        sigma = as_permutation(arr)
        return permutation_matrix(sigma), sigma
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        mat = arr.astype(float)
        is_perm = (
            np.all((mat == 0) | (mat == 1))
            and np.all(mat.sum(axis=0) == 1)
            and np.all(mat.sum(axis=1) == 1)
        )
        return mat, (np.argmax(mat, axis=1) if is_perm else None)
    raise ValueError(f"expected a permutation map or a square matrix, got shape {arr.shape}")


def mismatch_metrics(a, b) -> tuple[int | None, float]:
    """Return ``(displaced, entrywise_l1)`` between two permutations or doubly-stochastic matrices.

    ``displaced`` counts rows whose hard assignments differ and is ``None`` unless
    both arguments are permutations.
    """
    A, sa = _as_matrix(a)
    B, sb = _as_matrix(b)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    l1 = float(np.abs(A - B).sum())
    displaced = None if sa is None or sb is None else int(np.count_nonzero(sa != sb))
    return displaced, l1
