"""Synthetic sparsely-permuted regression data and the repeated-simulation benchmark."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .core import ALD, Dataset, FitConfig, Gaussian, LikelihoodFamily
from .engine import gibbs_fit, posterior_l2_distance, summarize, warmup_kernels

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimConfig:
    n: int = 100
    d: int = 20
    s0: int = 6
    sigma: float = 0.1
    beta0: tuple | None = None     # None means all ones
    family: LikelihoodFamily = field(default_factory=Gaussian)
    duplicate_first: bool = True
    seed: int = 0

    def __post_init__(self) -> None:
        if not 2 <= self.s0 < self.n:
            raise ValueError(f"need 2 <= s0 < n, got s0={self.s0}, n={self.n}")
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.beta0 is not None and len(self.beta0) != self.d:
            raise ValueError(f"beta0 has length {len(self.beta0)}, expected d={self.d}")

    def beta(self) -> np.ndarray:
        return np.ones(self.d) if self.beta0 is None else np.asarray(self.beta0, dtype=float)


@dataclass(frozen=True)
class SimOutput:
    data: Dataset
    beta0: np.ndarray
    pi0: np.ndarray           # hard permutation, y[i] ~ X[pi0[i]]
    pi0_target: np.ndarray    # hard pi0 with the duplicated pair split 50/50


def sample_noise(family: LikelihoodFamily, sigma: float, size: int, rng: np.random.Generator) -> np.ndarray:
    if isinstance(family, ALD):
        # difference of exponentials with rates tau/sigma and (1-tau)/sigma
        tau = family.tau
        return sigma * (rng.standard_exponential(size) / tau - rng.standard_exponential(size) / (1.0 - tau))
    return sigma * rng.standard_normal(size)


def generate_linear(cfg: SimConfig, rng: np.random.Generator | None = None) -> SimOutput:
    """Draw clean pairs, reverse the covariate rows of the first ``s0`` units and
    optionally overwrite unit ``s0`` with a copy of the original first pair."""
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    n, d, s0 = cfg.n, cfg.d, cfg.s0
    beta0 = cfg.beta()
    X = rng.standard_normal((n, d))
    y = X @ beta0 + sample_noise(cfg.family, cfg.sigma, n, rng)

    pi0 = np.arange(n, dtype=np.int64)
    pi0[:s0] = np.arange(s0 - 1, -1, -1)
    X_obs = X[pi0].copy()
    y_obs = y.copy()

    target = np.zeros((n, n))
    target[np.arange(n), pi0] = 1.0
    if cfg.duplicate_first:
        X_obs[s0] = X[0]
        y_obs[s0] = y[0]
        # responses 0 and s0 are identical, as are covariate rows s0-1 and s0
        block = np.ix_([0, s0], [s0 - 1, s0])
        target[block] = 0.5
    return SimOutput(Dataset(y_obs, X_obs), beta0, pi0, target)


# --------------------------------------------------------------------------- #
# Benchmark
# --------------------------------------------------------------------------- #


ALPHA_ONE_OVER_N = "1/n"


@dataclass(frozen=True)
class BenchmarkGrid:
    n_values: tuple = (100, 150, 200, 250)
    alpha_values: tuple = (ALPHA_ONE_OVER_N, 0.1, 0.5, 0.75, 0.99)
    replicates: int = 20
    sim: SimConfig = field(default_factory=SimConfig)
    fit: FitConfig = field(default_factory=FitConfig)
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self) -> None:
        if not self.n_values or not self.alpha_values:
            raise ValueError("grid lists must be non-empty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")

    def cells(self) -> list[tuple[int, object]]:
        return [(n, a) for n in self.n_values for a in self.alpha_values]


def alpha_value(alpha, n: int) -> float:
    return 1.0 / n if alpha in (None, ALPHA_ONE_OVER_N) else float(alpha)


def alpha_label(alpha) -> str:
    return ALPHA_ONE_OVER_N if alpha in (None, ALPHA_ONE_OVER_N) else repr(float(alpha))


def replicate_seeds(seed: int, n_cells: int, replicates: int) -> np.ndarray:
    """Independent (sim, fit) seed pairs per cell and replicate: shape ``(cells, reps, 2)``."""
    ss = np.random.SeedSequence(seed)
    return ss.generate_state(n_cells * replicates * 2, dtype=np.uint64).reshape(n_cells, replicates, 2)


def run_replicate(sim: SimConfig, fit: FitConfig, sim_seed: int, fit_seed: int) -> dict:
    out = generate_linear(replace(sim, seed=int(sim_seed)))
    t0 = time.perf_counter()
    draws = gibbs_fit(out.data, replace(fit, seed=int(fit_seed)))
    elapsed = time.perf_counter() - t0
    summ = summarize(draws, (out.beta0, out.pi0), out.pi0_target)
    m = summ.metrics
    return {
        "beta_l1": m["mean_abs_beta_error"],
        "pi_l1_raw": m["entrywise_l1_pi"],
        "pi_l1_norm": m["entrywise_l1_pi_norm"],
        "pi_l1_target": m["entrywise_l1_pi_target"],
        "sec_per_iter": draws.wall_time_per_iter,
        "beta_l2_dist": posterior_l2_distance(draws, out.beta0),
        "fit_seconds": elapsed,
    }


def _cell_job(args):
    n, alpha, sim, fit, seeds = args
    warmup_kernels()
    sim_c = replace(sim, n=n)
    fit_c = replace(fit, alpha=alpha_value(alpha, n))
    reps = []
    error = ""
    for sim_seed, fit_seed in seeds:
        try:
            reps.append(run_replicate(sim_c, fit_c, sim_seed, fit_seed))
        except Exception as exc:  # one bad cell must not sink the grid
            error = f"{type(exc).__name__}: {exc}"
            log.warning("cell n=%d alpha=%s failed: %s", n, alpha, error)
            break
    return n, alpha, reps, error


def run_benchmark(grid: BenchmarkGrid):
    """Run every (n, alpha) cell; returns ``(table_rows, timing_rows)`` in grid order."""
    cells = grid.cells()
    seeds = replicate_seeds(grid.seed, len(cells), grid.replicates)
    jobs = [(n, a, grid.sim, grid.fit, seeds[i]) for i, (n, a) in enumerate(cells)]
    if grid.n_jobs > 1:
        with ProcessPoolExecutor(max_workers=grid.n_jobs) as pool:
            results = list(pool.map(_cell_job, jobs))
    else:
        results = [_cell_job(j) for j in jobs]

    table, timing = [], []
    for n, alpha, reps, error in results:
        row = {"n": n, "alpha": alpha_label(alpha), "replicates": len(reps), "error": error}
        if reps and not error:
            for key in ("beta_l1", "pi_l1_raw", "pi_l1_norm", "pi_l1_target", "sec_per_iter", "beta_l2_dist"):
                row[key] = float(np.mean([r[key] for r in reps]))
        else:
            for key in ("beta_l1", "pi_l1_raw", "pi_l1_norm", "pi_l1_target", "sec_per_iter", "beta_l2_dist"):
                row[key] = float("nan")
        table.append(row)
        for i, r in enumerate(reps):
            timing.append({"n": n, "alpha": alpha_label(alpha), "replicate": i, "sec_per_iter": r["sec_per_iter"]})
    return table, timing


def concentration_diagnostic(n_values, replicates: int = 20, sim: SimConfig | None = None,
                             fit: FitConfig | None = None, seed: int = 0) -> list[dict]:
    """Mean posterior L2 distance of beta to the truth at temperature 1/n, per sample size."""
    grid = BenchmarkGrid(
        n_values=tuple(n_values),
        alpha_values=(ALPHA_ONE_OVER_N,),
        replicates=replicates,
        sim=sim or SimConfig(),
        fit=fit or FitConfig(),
        seed=seed,
    )
    table, _ = run_benchmark(grid)
    return [{"n": row["n"], "mean_l2": row["beta_l2_dist"], "error": row["error"]} for row in table]
