"""Batch command-line interface: simulate, fit, benchmark and summarize.

Configuration is an INI file with optional ``[sim]``, ``[fit]`` and
``[benchmark]`` sections (see ``docs/example.ini``).  Unknown sections or keys
are rejected.  Exit codes: 0 success, 2 configuration error, 3 IO error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    ALD,
    Dataset,
    FitConfig,
    PriorConfig,
    as_permutation,
    displaced_count,
    family_from_name,
    mismatch_metrics,
)
from .engine import Draws, McemResult, fit, pi_mean, summarize
from .hmc import HmcConfig
from .simlab import ALPHA_ONE_OVER_N, BenchmarkGrid, SimConfig, generate_linear, run_benchmark

log = logging.getLogger("sparseperm")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

TABLE_COLUMNS = ("n", "alpha", "beta_l1", "pi_l1_raw", "pi_l1_norm", "sec_per_iter", "replicates", "error")
TIMING_COLUMNS = ("n", "alpha", "replicate", "sec_per_iter")
TRIPLET_CUTOFF = 1e-12


class ConfigError(Exception):
    """Malformed or inconsistent configuration."""


class NumericError(Exception):
    """A fit or simulation produced a non-finite or degenerate result."""


# --------------------------------------------------------------------------- #
# Configuration
# --------------------------------------------------------------------------- #

SIM_KEYS = {"n", "d", "s0", "sigma", "beta0", "family", "tau", "duplicate_first", "seed"}
FIT_KEYS = {
    "alpha", "family", "tau", "beta_prior_var", "sigma2_prior_var", "k_bound", "gibbs_iters",
    "warmup_iters", "perm_chain_steps_per_gibbs", "hmc_per_sweep", "step_size", "n_leapfrog",
    "target_accept", "adapt_iters", "jitter", "seed", "mode", "thin", "mcem_max_iter", "mcem_tol", "d",
}
BENCH_KEYS = {"n_values", "alpha_values", "replicates", "seed", "n_jobs"}
SECTIONS = {"sim": SIM_KEYS, "fit": FIT_KEYS, "benchmark": BENCH_KEYS}


@dataclass
class RunConfig:
    sim: SimConfig
    fit: FitConfig
    grid: BenchmarkGrid
    fit_d: int | None = None
    raw: dict = field(default_factory=dict)


def _int(section: str, key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected an integer, got {value!r}") from None


def _float(section: str, key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {value!r}") from None


def _bool(section: str, key: str, value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {value!r}")


def _optional_int(section: str, key: str, value: str) -> int | None:
    return None if value.strip().lower() in ("", "none") else _int(section, key, value)


def _alpha(section: str, key: str, value: str):
    v = value.strip()
    return ALPHA_ONE_OVER_N if v == ALPHA_ONE_OVER_N else _float(section, key, v)


def _list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _family(sec: dict, section: str):
    if "family" not in sec and "tau" not in sec:
        return None
    tau = _float(section, "tau", sec["tau"]) if "tau" in sec else 0.5
    try:
        return family_from_name(sec.get("family", "ald" if "tau" in sec else "gaussian"), tau)
    except ValueError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def read_config(path: str | Path | None) -> RunConfig:
    """Parse an INI config; a missing path means all defaults."""
    parser = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise OSError(f"cannot read config {path}: {exc.strerror or exc}") from exc
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
    raw = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(f"unknown config section [{name}]")
        sec = dict(parser.items(name))
        unknown = sorted(set(sec) - SECTIONS[name])
        if unknown:
            raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
        raw[name] = sec
    return build_config(raw)


def build_config(raw: dict) -> RunConfig:
    s = raw.get("sim", {})
    f = raw.get("fit", {})
    b = raw.get("benchmark", {})
    try:
        sim_kw = {}
        for key in ("n", "d", "s0", "seed"):
            if key in s:
                sim_kw[key] = _int("sim", key, s[key])
        if "sigma" in s:
            sim_kw["sigma"] = _float("sim", "sigma", s["sigma"])
        if "beta0" in s:
            sim_kw["beta0"] = tuple(_float("sim", "beta0", v) for v in _list(s["beta0"]))
        if "duplicate_first" in s:
            sim_kw["duplicate_first"] = _bool("sim", "duplicate_first", s["duplicate_first"])
        sim_family = _family(s, "sim")
        if sim_family is not None:
            sim_kw["family"] = sim_family
        sim = SimConfig(**sim_kw)

        prior_kw = {}
        for key in ("beta_prior_var", "sigma2_prior_var"):
            if key in f:
                prior_kw[key] = _float("fit", key, f[key])
        if "k_bound" in f:
            prior_kw["k_bound"] = _optional_int("fit", "k_bound", f["k_bound"])
        hmc_kw = {}
        for key in ("step_size", "target_accept", "jitter"):
            if key in f:
                hmc_kw[key] = _float("fit", key, f[key])
        for key in ("n_leapfrog", "adapt_iters"):
            if key in f:
                hmc_kw[key] = _int("fit", key, f[key])
        fit_kw = {"priors": PriorConfig(**prior_kw), "hmc": HmcConfig(**hmc_kw)}
        if "alpha" in f:
            a = _alpha("fit", "alpha", f["alpha"])
            fit_kw["alpha"] = None if a == ALPHA_ONE_OVER_N else a
        for key in ("gibbs_iters", "hmc_per_sweep", "seed", "thin", "mcem_max_iter"):
            if key in f:
                fit_kw[key] = _int("fit", key, f[key])
        for key in ("warmup_iters", "perm_chain_steps_per_gibbs"):
            if key in f:
                fit_kw[key] = _optional_int("fit", key, f[key])
        if "mcem_tol" in f:
            fit_kw["mcem_tol"] = _float("fit", "mcem_tol", f["mcem_tol"])
        if "mode" in f:
            fit_kw["mode"] = f["mode"].strip()
        # the fit family defaults to the simulated one so benchmark cells stay consistent
        fit_family = _family(f, "fit") or sim_family
        if fit_family is not None:
            fit_kw["family"] = fit_family
        fitc = FitConfig(**fit_kw)
        fit_d = _int("fit", "d", f["d"]) if "d" in f else None

        grid_kw = {}
        if "n_values" in b:
            grid_kw["n_values"] = tuple(_int("benchmark", "n_values", v) for v in _list(b["n_values"]))
        if "alpha_values" in b:
            grid_kw["alpha_values"] = tuple(_alpha("benchmark", "alpha_values", v) for v in _list(b["alpha_values"]))
        for key in ("replicates", "seed", "n_jobs"):
            if key in b:
                grid_kw[key] = _int("benchmark", key, b[key])
        grid = BenchmarkGrid(sim=sim, fit=fitc, **grid_kw)
        for a in grid.alpha_values:
            if a != ALPHA_ONE_OVER_N and not 0.0 < a <= 1.0:
                raise ConfigError(f"[benchmark] alpha_values: {a} is outside (0, 1]")
        for n in grid.n_values:
            if not 2 <= sim.s0 < n:
                raise ConfigError(f"[benchmark] n_values: n={n} is incompatible with s0={sim.s0}")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(sim, fitc, grid, fit_d, raw)


# --------------------------------------------------------------------------- #
# Serialization
# --------------------------------------------------------------------------- #


def fmt(x) -> str:
    """Locale-independent decimal text that round-trips a double."""
    return format(float(x), ".17g")


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path: Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_dataset(path: Path, data: Dataset) -> None:
    header = ["y"] + [f"x{j + 1}" for j in range(data.d)]
    rows = ([fmt(data.y[i])] + [fmt(v) for v in data.X[i]] for i in range(data.n))
    write_csv(path, header, rows)


def load_dataset(path: str | Path) -> Dataset:
    path = Path(path)
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        body = fh.read()
    d = len(header) - 1
    if d < 1 or header != ["y"] + [f"x{j + 1}" for j in range(d)]:
        raise OSError(f"{path}: expected header y,x1,...,xd")
    try:
        arr = np.loadtxt(body.splitlines(), delimiter=",", ndmin=2)
    except ValueError as exc:
        raise OSError(f"{path}: malformed data ({exc})") from None
    if arr.shape[1] != d + 1:
        raise OSError(f"{path}: rows have {arr.shape[1]} fields, header has {d + 1}")
    try:
        return Dataset(arr[:, 0], arr[:, 1:])
    except ValueError as exc:
        raise OSError(f"{path}: {exc}") from None


def sparse_triplets(mat: np.ndarray, cutoff: float = TRIPLET_CUTOFF) -> list:
    rows, cols = np.nonzero(np.abs(mat) >= cutoff)
    return [[int(i), int(j), float(mat[i, j])] for i, j in zip(rows, cols)]


def dense_from_triplets(triplets, n: int) -> np.ndarray:
    out = np.zeros((n, n))
    for i, j, v in triplets:
        out[int(i), int(j)] = float(v)
    return out


def family_dict(family) -> dict:
    return {"family": family.name, "tau": family.tau} if isinstance(family, ALD) else {"family": family.name}


def _config_snapshot(cfg: RunConfig) -> dict:
    def clean(obj):
        if isinstance(obj, dict):
            return {k: clean(v) for k, v in obj.items()}
        if isinstance(obj, (list, tuple)):
            return [clean(v) for v in obj]
        return obj

    fitd = asdict(cfg.fit)
    fitd["family"] = family_dict(cfg.fit.family)
    simd = asdict(cfg.sim)
    simd["family"] = family_dict(cfg.sim.family)
    return clean({"sim": simd, "fit": fitd, "raw": cfg.raw})


class Manifest:
    """Run record: config snapshot, seed, version, timestamps, outputs and stage wall times."""

    def __init__(self, command: str, cfg: RunConfig, seed: int, out_dir: Path):
        self.out_dir = out_dir
        self.data = {
            "command": command,
            "artifact_version": __version__,
            "seed": int(seed),
            "config": _config_snapshot(cfg),
            "started": datetime.now(timezone.utc).isoformat(),
            "finished": None,
            "outputs": [],
            "stage_seconds": {},
        }
        self._t = time.perf_counter()

    def stage(self, name: str) -> None:
        now = time.perf_counter()
        self.data["stage_seconds"][name] = now - self._t
        self._t = now

    def add(self, path: Path) -> None:
        self.data["outputs"].append(path.name)

    def write(self) -> Path:
        path = self.out_dir / "manifest.json"
        self.data["finished"] = datetime.now(timezone.utc).isoformat()
        self.data["outputs"].append(path.name)
        missing = [p for p in self.data["outputs"][:-1] if not (self.out_dir / p).exists()]
        if missing:
            raise OSError(f"outputs missing at exit: {missing}")
        write_json(path, self.data)
        return path


def _out_dir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------------- #
# Commands
# --------------------------------------------------------------------------- #


def cmd_simulate(config_path, out_dir, seed: int | None = None) -> int:
    cfg = read_config(config_path)
    if seed is not None:
        cfg.sim = replace(cfg.sim, seed=seed)
    out = _out_dir(out_dir)
    manifest = Manifest("simulate", cfg, cfg.sim.seed, out)
    sim = generate_linear(cfg.sim)
    manifest.stage("simulate")

    data_path = out / "data.csv"
    write_dataset(data_path, sim.data)
    manifest.add(data_path)
    truth = {
        "beta0": [float(v) for v in sim.beta0],
        "sigma": cfg.sim.sigma,
        **family_dict(cfg.sim.family),
        "s0": cfg.sim.s0,
        "duplicate_first": cfg.sim.duplicate_first,
        "pi0": [int(v) for v in sim.pi0],
        "displaced": displaced_count(sim.pi0),
        "pi0_target": sparse_triplets(sim.pi0_target),
    }
    truth_path = out / "truth.json"
    write_json(truth_path, truth)
    manifest.add(truth_path)
    manifest.stage("write")
    manifest.write()
    log.info("simulated n=%d d=%d into %s", sim.data.n, sim.data.d, out)
    return EXIT_OK


def _summary_from_mcem(res: McemResult, n: int) -> dict:
    pm = np.zeros((n, n))
    pm[np.arange(n), res.perm] = 1.0
    return {
        "mode": "mcem",
        "beta_mean": [float(v) for v in res.state.beta],
        "beta_ci": None,
        "sigma2_mean": res.state.sigma2,
        "n_draws": len(res.states),
        "converged": res.converged,
        "iterations": res.iterations,
        "perm": [int(v) for v in res.perm],
        "pi_mean": sparse_triplets(pm),
    }


def _summary_from_draws(draws: Draws, truth: dict | None) -> dict:
    ref = target = None
    if truth is not None:
        n = draws.perm.shape[1]
        ref = (np.asarray(truth["beta0"]), np.asarray(truth["pi0"]))
        target = dense_from_triplets(truth["pi0_target"], n)
    s = summarize(draws, ref, target)
    return {
        "mode": "gibbs",
        "alpha": draws.alpha,
        "beta_mean": [float(v) for v in s.beta_mean],
        "beta_ci": [[float(lo), float(hi)] for lo, hi in s.beta_ci],
        "sigma2_mean": s.sigma2_mean,
        "n_draws": s.n_draws,
        "hmc": draws.hmc.as_dict(),
        "hmc_step_size": draws.step_size,
        "perm_accept_rate": draws.perm_accept_rate,
        "pi_mean": sparse_triplets(s.pi_mean),
        "metrics": s.metrics,
    }


def _write_draws(out: Path, beta, sigma2, perms, manifest: Manifest) -> None:
    d = beta.shape[1]
    p = out / "draws_beta.csv"
    write_csv(p, [f"beta{j + 1}" for j in range(d)], ([fmt(v) for v in row] for row in beta))
    manifest.add(p)
    p = out / "draws_sigma2.csv"
    write_csv(p, ["sigma2"], ([fmt(v)] for v in sigma2))
    manifest.add(p)
    p = out / "draws_perm.jsonl"
    with open(p, "w", encoding="utf-8", newline="") as fh:
        for perm in perms:
            fh.write(json.dumps([int(v) for v in perm]) + "\n")
    manifest.add(p)


def cmd_fit(data_path, config_path, out_dir, seed: int | None = None, mode: str | None = None,
            truth_path=None) -> int:
    cfg = read_config(config_path)
    try:
        if seed is not None:
            cfg.fit = replace(cfg.fit, seed=seed)
        if mode is not None:
            cfg.fit = replace(cfg.fit, mode=mode)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    data = load_dataset(data_path)
    truth = read_json(Path(truth_path)) if truth_path is not None else None
    if cfg.fit_d is not None and cfg.fit_d != data.d:
        raise ConfigError(f"[fit] d={cfg.fit_d} but the data have d={data.d}")
    if cfg.fit.priors.k_bound is not None and cfg.fit.priors.k_bound > data.n:
        raise ConfigError(f"[fit] k_bound={cfg.fit.priors.k_bound} exceeds n={data.n}")
    if truth is not None and len(truth.get("beta0", [])) != data.d:
        raise ConfigError("truth beta0 length does not match the data dimension")

    out = _out_dir(out_dir)
    manifest = Manifest("fit", cfg, cfg.fit.seed, out)
    try:
        result = fit(data, cfg.fit)
    except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        raise NumericError(f"fit failed: {exc}") from exc
    manifest.stage("fit")

    if isinstance(result, McemResult):
        beta = np.array([s.beta for s in result.states])
        sigma2 = np.array([s.sigma2 for s in result.states])
        perms = result.perms
        summary = _summary_from_mcem(result, data.n)
        if truth is not None:
            disp, l1 = mismatch_metrics(result.perm, np.asarray(truth["pi0"]))
            summary["metrics"] = {
                "mean_abs_beta_error": float(np.mean(np.abs(result.state.beta - np.asarray(truth["beta0"])))),
                "displaced_vs_truth": disp,
                "entrywise_l1_pi": l1,
            }
    else:
        if not (np.all(np.isfinite(result.beta)) and np.all(np.isfinite(result.sigma2))):
            raise NumericError("non-finite draws")
        beta, sigma2, perms = result.beta, result.sigma2, result.perm
        summary = _summary_from_draws(result, truth)
    _write_draws(out, beta, sigma2, perms, manifest)
    p = out / "summary.json"
    write_json(p, summary)
    manifest.add(p)
    manifest.stage("write")
    manifest.write()
    log.info("fit (%s) wrote %d draws to %s", cfg.fit.mode, beta.shape[0], out)
    return EXIT_OK


def cmd_benchmark(config_path, out_dir, seed: int | None = None) -> int:
    cfg = read_config(config_path)
    if seed is not None:
        cfg.grid = replace(cfg.grid, seed=seed)
    out = _out_dir(out_dir)
    manifest = Manifest("benchmark", cfg, cfg.grid.seed, out)
    table, timing = run_benchmark(cfg.grid)
    manifest.stage("benchmark")

    def cell(row, key):
        v = row[key]
        if key in ("n", "replicates"):
            return str(int(v))
        if key in ("alpha", "error"):
            return str(v).replace(",", ";").replace("\n", " ")
        return fmt(v)

    p = out / "table.csv"
    write_csv(p, TABLE_COLUMNS, ([cell(r, k) for k in TABLE_COLUMNS] for r in table))
    manifest.add(p)
    p = out / "timing.csv"
    write_csv(p, TIMING_COLUMNS, ([cell(r, k) if k != "replicate" else str(r[k]) for k in TIMING_COLUMNS]
                                  for r in timing))
    manifest.add(p)
    manifest.stage("write")
    manifest.write()
    if all(r["error"] for r in table):
        raise NumericError("every benchmark cell failed")
    return EXIT_OK


def load_draws(draws_dir) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Read ``(beta, sigma2, perm)`` traces written by ``fit``."""
    draws_dir = Path(draws_dir)
    beta = np.loadtxt(draws_dir / "draws_beta.csv", delimiter=",", skiprows=1, ndmin=2)
    sigma2 = np.loadtxt(draws_dir / "draws_sigma2.csv", delimiter=",", skiprows=1, ndmin=1)
    with open(draws_dir / "draws_perm.jsonl", encoding="utf-8") as fh:
        perm = np.array([json.loads(line) for line in fh if line.strip()], dtype=np.int64)
    if not (beta.shape[0] == sigma2.shape[0] == perm.shape[0]) or beta.shape[0] == 0:
        raise OSError(f"{draws_dir}: draws files are empty or have different lengths")
    return beta, sigma2, perm


def fd_histogram(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Counts and edges with the Freedman-Diaconis bin width."""
    edges = np.histogram_bin_edges(x, bins="fd")
    counts, edges = np.histogram(x, bins=edges)
    return counts, edges


def format_report(beta, sigma2, perm) -> str:
    ci = np.quantile(beta, [0.025, 0.975], axis=0).T
    mean = beta.mean(axis=0)
    lines = [f"draws: {beta.shape[0]}", f"{'param':>8}  {'mean':>12}  {'q2.5':>12}  {'q97.5':>12}"]
    for j in range(beta.shape[1]):
        lines.append(f"{'beta' + str(j + 1):>8}  {mean[j]:>12.6f}  {ci[j, 0]:>12.6f}  {ci[j, 1]:>12.6f}")
    q = np.quantile(sigma2, [0.025, 0.975])
    lines.append(f"{'sigma2':>8}  {sigma2.mean():>12.6f}  {q[0]:>12.6f}  {q[1]:>12.6f}")
    pm = pi_mean(perm)
    n = pm.shape[0]
    lines.append(f"pi_mean diagonal mass: {np.trace(pm) / n:.6f}")
    lines.append(f"mean displaced per draw: {np.mean([displaced_count(p) for p in perm]):.3f}")
    return "\n".join(lines)


def cmd_summarize(draws_dir, out=None) -> int:
    draws_dir = Path(draws_dir)
    try:
        beta, sigma2, perm = load_draws(draws_dir)
    except ValueError as exc:
        raise OSError(f"{draws_dir}: malformed draws ({exc})") from None
    for p in perm:
        as_permutation(p, perm.shape[1])
    for j in range(beta.shape[1]):
        counts, edges = fd_histogram(beta[:, j])
        write_csv(
            draws_dir / f"hist_beta_{j + 1}.csv",
            ("bin_left", "bin_right", "count"),
            ((fmt(edges[k]), fmt(edges[k + 1]), str(int(counts[k]))) for k in range(counts.size)),
        )
    print(format_report(beta, sigma2, perm), file=out or sys.stdout)
    return EXIT_OK


# --------------------------------------------------------------------------- #
# Entry point
# --------------------------------------------------------------------------- #


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparseperm", description=__doc__.splitlines()[0])
    parser.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    # --quiet is accepted before or after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="generate a synthetic dataset and its ground truth")
    p.add_argument("--config", help="INI config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="overrides [sim] seed")

    p = sub.add_parser("fit", parents=[common], help="sample the tempered posterior or run MC-EM")
    p.add_argument("data", help="data.csv with header y,x1,...,xd")
    p.add_argument("--config", help="INI config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="overrides [fit] seed")
    p.add_argument("--mode", choices=("gibbs", "mcem"), help="overrides [fit] mode")
    p.add_argument("--truth", help="truth.json from simulate; adds error metrics to the summary")

    p = sub.add_parser("benchmark", parents=[common], help="repeated simulate-fit-summarize over an (n, alpha) grid")
    p.add_argument("--config", help="INI config file (defaults if omitted)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="overrides [benchmark] seed")

    p = sub.add_parser("summarize", parents=[common], help="print posterior summaries and write beta histograms")
    p.add_argument("draws_dir", help="directory written by fit")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, args.seed)
        if args.command == "fit":
            return cmd_fit(args.data, args.config, args.out, args.seed, args.mode, args.truth)
        if args.command == "benchmark":
            return cmd_benchmark(args.config, args.out, args.seed)
        return cmd_summarize(args.draws_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, json.JSONDecodeError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericError, ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
