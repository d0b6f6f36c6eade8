"""Hamiltonian Monte Carlo with an identity mass matrix.

A *target* is any callable ``q -> (logp, grad)`` returning the log-density and
its gradient at ``q``.  A target may also provide a ``trajectory(q, p, eps,
n_steps)`` method (a faster equivalent of the generic leapfrog loop here).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Target = Callable[[np.ndarray], "tuple[float, np.ndarray]"]

DIVERGENCE_THRESHOLD = 1000.0


@dataclass(frozen=True)
class HmcConfig:
    step_size: float = 0.05
    n_leapfrog: int = 20
    target_accept: float = 0.75
    adapt_iters: int = 200
    jitter: float = 0.2  # per-transition step size drawn from eps * [1 - jitter, 1 + jitter]

    def __post_init__(self) -> None:
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")
        if self.n_leapfrog < 1:
            raise ValueError("n_leapfrog must be >= 1")
        if not 0.0 < self.target_accept < 1.0:
            raise ValueError("target_accept must lie in (0, 1)")
        if self.adapt_iters < 0:
            raise ValueError("adapt_iters must be >= 0")
        if not 0.0 <= self.jitter < 1.0:
            raise ValueError("jitter must lie in [0, 1)")


@dataclass
class HmcDiagnostics:
    n_transitions: int = 0
    n_accepted: int = 0
    sum_abs_energy_error: float = 0.0
    divergences: int = 0

    def record(self, accepted: bool, energy_error: float) -> None:
        self.n_transitions += 1
        self.n_accepted += int(accepted)
        if math.isfinite(energy_error) and abs(energy_error) <= DIVERGENCE_THRESHOLD:
            self.sum_abs_energy_error += abs(energy_error)
        else:
            self.divergences += 1

    @property
    def accept_rate(self) -> float:
        return self.n_accepted / self.n_transitions if self.n_transitions else 0.0

    @property
    def mean_energy_error(self) -> float:
        good = self.n_transitions - self.divergences
        return self.sum_abs_energy_error / good if good else 0.0

    def as_dict(self) -> dict:
        return {
            "accept_rate": self.accept_rate,
            "mean_energy_error": self.mean_energy_error,
            "divergences": self.divergences,
            "transitions": self.n_transitions,
        }


def leapfrog(q, p, eps: float, n_steps: int, grad: Callable[[np.ndarray], np.ndarray]):
    """Integrate ``n_steps`` half-kick / drift / half-kick steps.

    ``grad`` returns the gradient of the log-density, so the kicks move the
    momentum uphill in log-density (downhill in potential energy).
    """
    q = np.array(q, dtype=float)
    p = np.array(p, dtype=float)
    g = grad(q)
    for _ in range(n_steps):
        p = p + 0.5 * eps * g
        q = q + eps * p
        g = grad(q)
        p = p + 0.5 * eps * g
    return q, p


def _trajectory(q, p, eps, n_steps, target: Target):
    logp, g = target(q)
    for _ in range(n_steps):
        p = p + 0.5 * eps * g
        q = q + eps * p
        logp, g = target(q)
        if not math.isfinite(logp):
            return q, p, -math.inf
        p = p + 0.5 * eps * g
    return q, p, logp


def hmc_transition(q, target: Target, eps: float, n_steps: int, rng: np.random.Generator,
                   logp0: float | None = None, jitter: float = 0.0):
    """One HMC transition.  Returns ``(q_next, accepted, energy_error)``.

    ``energy_error`` is ``H(end) - H(start)`` with ``H = -logp + |p|^2 / 2``;
    non-finite or larger than the divergence threshold means automatic rejection.
    A positive ``jitter`` scales ``eps`` by a uniform factor in
    ``[1 - jitter, 1 + jitter]``, which breaks the near-periodic trajectories a
    fixed path length can produce on close-to-Gaussian targets.
    """
    q = np.asarray(q, dtype=float)
    if logp0 is None:
        logp0 = target(q)[0]
    if not math.isfinite(logp0):
        raise ValueError("target is not finite at the starting point")
    if jitter > 0.0:
        eps = eps * (1.0 + jitter * (2.0 * rng.random() - 1.0))
    p0 = rng.standard_normal(q.shape)
    h0 = -logp0 + 0.5 * float(p0 @ p0)
    traj = getattr(target, "trajectory", None)
    if traj is not None:
        q1, p1, logp1 = traj(q, p0, eps, n_steps)
    else:
        q1, p1, logp1 = _trajectory(q, p0, eps, n_steps, target)
    with np.errstate(over="ignore", invalid="ignore"):
        kinetic = 0.5 * float(p1 @ p1)
    if not math.isfinite(logp1) or not math.isfinite(kinetic):
        # consume the acceptance draw anyway so the stream stays aligned
        rng.random()
        return q, False, math.inf
    h1 = -logp1 + kinetic
    delta = h1 - h0
    u = rng.random()
    if abs(delta) > DIVERGENCE_THRESHOLD:
        return q, False, delta
    accepted = math.log(u) < -delta if u > 0 else True
    return (q1 if accepted else q), accepted, delta


class StepSizeAdapter:
    """Dual-averaging adaptation of ``log(eps)`` toward a target acceptance probability.

    A stochastic-approximation scheme: the running mean of ``target - accept``
    is shrunk toward ``mu = log(10 * eps0)``, and a ``t^-kappa`` weighted
    average of the iterates gives the step size used after warmup.
    """

    def __init__(self, eps0: float, target_accept: float, gamma: float = 0.05, t0: float = 10.0,
                 kappa: float = 0.75):
        self.mu = math.log(10.0 * eps0)
        self.log_eps = math.log(eps0)
        self.target_accept = target_accept
        self.gamma = gamma
        self.t0 = t0
        self.kappa = kappa
        self.t = 0
        self._h_bar = 0.0
        self._avg_log_eps = self.log_eps

    @property
    def eps(self) -> float:
        return math.exp(self.log_eps)

    def update(self, energy_error: float) -> None:
        accept_prob = math.exp(min(0.0, -energy_error)) if math.isfinite(energy_error) else 0.0
        self.t += 1
        t = self.t
        w = 1.0 / (t + self.t0)
        self._h_bar = (1.0 - w) * self._h_bar + w * (self.target_accept - accept_prob)
        log_eps = self.mu - math.sqrt(t) / self.gamma * self._h_bar
        self.log_eps = min(max(log_eps, math.log(1e-8)), math.log(1e3))
        eta = t ** -self.kappa
        self._avg_log_eps = eta * self.log_eps + (1.0 - eta) * self._avg_log_eps

    def final_eps(self) -> float:
        """Averaged step size; less noisy than the last iterate."""
        return math.exp(self._avg_log_eps)


def warmup_adapt(q0, target: Target, cfg: HmcConfig, rng: np.random.Generator):
    """Tune the step size over ``cfg.adapt_iters`` transitions.

    Returns ``(step_size, q)`` where ``q`` is the chain position after warmup.
    With ``adapt_iters == 0`` the configured step size is returned unchanged.
    """
    q = np.asarray(q0, dtype=float)
    if cfg.adapt_iters == 0:
        return cfg.step_size, q
    adapter = StepSizeAdapter(cfg.step_size, cfg.target_accept)
    for _ in range(cfg.adapt_iters):
        q, _, delta = hmc_transition(q, target, adapter.eps, cfg.n_leapfrog, rng, jitter=cfg.jitter)
        adapter.update(delta)
    return adapter.final_eps(), q


def sample(q0, target: Target, eps: float, n_steps: int, n_draws: int, rng: np.random.Generator,
           jitter: float = 0.0):
    """Run ``n_draws`` transitions; returns the draws array and diagnostics."""
    q = np.asarray(q0, dtype=float)
    diag = HmcDiagnostics()
    out = np.empty((n_draws, q.size))
    for i in range(n_draws):
        q, accepted, delta = hmc_transition(q, target, eps, n_steps, rng, jitter=jitter)
        diag.record(accepted, delta)
        out[i] = q
    return out, diag
