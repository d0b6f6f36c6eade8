"""Bayesian linear and quantile regression when a few responses are matched to the wrong covariate rows."""

__version__ = "0.1.0"

from .core import (  # noqa: E402
    ALD,
    Dataset,
    FitConfig,
    Gaussian,
    PriorConfig,
    RegressionState,
    log_fractional_target,
    mismatch_metrics,
)
from .engine import fit, gibbs_fit, mcem_fit, summarize  # noqa: E402
from .simlab import SimConfig, generate_linear  # noqa: E402

__all__ = [
    "ALD",
    "Dataset",
    "FitConfig",
    "Gaussian",
    "PriorConfig",
    "RegressionState",
    "SimConfig",
    "fit",
    "generate_linear",
    "gibbs_fit",
    "log_fractional_target",
    "mcem_fit",
    "mismatch_metrics",
    "summarize",
]
