import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from sparseperm.cli import (
    EXIT_CONFIG,
    EXIT_IO,
    EXIT_OK,
    ConfigError,
    dense_from_triplets,
    fd_histogram,
    load_dataset,
    main,
    read_config,
)
from sparseperm.simlab import SimConfig, generate_linear

SMALL = """\
[sim]
n = 30
d = 3
s0 = 4
seed = 5

[fit]
alpha = 1/n
k_bound = 4
gibbs_iters = 80
seed = 11

[benchmark]
n_values = 30
alpha_values = 0.99
replicates = 1
"""

GOLDEN_TABLE_HEADER = b"n,alpha,beta_l1,pi_l1_raw,pi_l1_norm,sec_per_iter,replicates,error\n"


@pytest.fixture
def cfg_path(tmp_path):
    p = tmp_path / "small.ini"
    p.write_text(SMALL, encoding="utf-8")
    return p


def run(*argv):
    return main(["--quiet", *[str(a) for a in argv]])


def test_simulate_files(cfg_path, tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--config", cfg_path, "--out", out) == EXIT_OK
    lines = (out / "data.csv").read_text().splitlines()
    assert lines[0] == "y,x1,x2,x3"
    assert len(lines) == 31
    truth = json.loads((out / "truth.json").read_text())
    assert sorted(truth["pi0"]) == list(range(30))
    assert truth["displaced"] == 4
    target = dense_from_triplets(truth["pi0_target"], 30)
    np.testing.assert_allclose(target.sum(axis=1), 1.0)
    manifest = json.loads((out / "manifest.json").read_text())
    for name in manifest["outputs"]:
        assert (out / name).exists()
    assert manifest["seed"] == 5


def test_default_simulation_displaces_six(tmp_path):
    out = tmp_path / "sim"
    assert run("simulate", "--out", out) == EXIT_OK
    assert json.loads((out / "truth.json").read_text())["displaced"] == 6


def test_dataset_roundtrip_full_precision(cfg_path, tmp_path):
    run("simulate", "--config", cfg_path, "--out", tmp_path)
    mem = generate_linear(SimConfig(n=30, d=3, s0=4, seed=5)).data
    disk = load_dataset(tmp_path / "data.csv")
    np.testing.assert_array_equal(disk.y, mem.y)
    np.testing.assert_array_equal(disk.X, mem.X)


def test_seed_flag_overrides_config(cfg_path, tmp_path):
    run("simulate", "--config", cfg_path, "--out", tmp_path / "a", "--seed", 6)
    a = load_dataset(tmp_path / "a" / "data.csv")
    np.testing.assert_array_equal(a.y, generate_linear(SimConfig(n=30, d=3, s0=4, seed=6)).data.y)


def pipeline(cfg_path, root):
    run("simulate", "--config", cfg_path, "--out", root / "sim")
    run("fit", root / "sim" / "data.csv", "--config", cfg_path, "--out", root / "fit",
        "--truth", root / "sim" / "truth.json")
    report = subprocess.run([sys.executable, "-m", "sparseperm", "summarize", str(root / "fit")],
                            capture_output=True, check=True).stdout
    return report


def deterministic_files(root):
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.name != "manifest.json")
    return {str(p.relative_to(root)): p.read_bytes() for p in files}


def test_pipeline_is_byte_identical(cfg_path, tmp_path):
    r1 = pipeline(cfg_path, tmp_path / "one")
    r2 = pipeline(cfg_path, tmp_path / "two")
    assert r1 == r2
    f1, f2 = deterministic_files(tmp_path / "one"), deterministic_files(tmp_path / "two")
    assert f1.keys() == f2.keys()
    assert "fit/hist_beta_1.csv" in f1
    for k in f1:
        assert f1[k] == f2[k], k


def test_fit_outputs(cfg_path, tmp_path):
    run("simulate", "--config", cfg_path, "--out", tmp_path / "sim")
    assert run("fit", tmp_path / "sim" / "data.csv", "--config", cfg_path, "--out", tmp_path / "fit") == EXIT_OK
    fit_dir = tmp_path / "fit"
    summary = json.loads((fit_dir / "summary.json").read_text())
    pm = dense_from_triplets(summary["pi_mean"], 30)
    np.testing.assert_allclose(pm.sum(axis=1), 1.0, atol=1e-9)
    assert all(v >= 1e-12 for _, _, v in summary["pi_mean"])
    perms = [json.loads(line) for line in (fit_dir / "draws_perm.jsonl").read_text().splitlines()]
    assert len(perms) == 40 == summary["n_draws"]
    assert (fit_dir / "draws_beta.csv").read_text().splitlines()[0] == "beta1,beta2,beta3"


def test_fit_clean_data_diagonal_mass(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 2))
    y = X @ np.array([1.5, -0.7]) + 0.001 * rng.normal(size=50)
    data = tmp_path / "data.csv"
    data.write_text("y,x1,x2\n" + "".join(f"{a},{b},{c}\n" for a, (b, c) in zip(y.tolist(), X.tolist())))
    cfg = tmp_path / "c.ini"
    cfg.write_text("[fit]\nalpha = 1\ngibbs_iters = 400\n")
    assert run("fit", data, "--config", cfg, "--out", tmp_path / "fit") == EXIT_OK
    pm = dense_from_triplets(json.loads((tmp_path / "fit" / "summary.json").read_text())["pi_mean"], 50)
    assert np.trace(pm) / 50 > 0.95


def test_fit_mcem_mode(cfg_path, tmp_path):
    run("simulate", "--config", cfg_path, "--out", tmp_path / "sim")
    assert run("fit", tmp_path / "sim" / "data.csv", "--config", cfg_path, "--out", tmp_path / "m",
               "--mode", "mcem") == EXIT_OK
    summary = json.loads((tmp_path / "m" / "summary.json").read_text())
    assert summary["mode"] == "mcem" and sorted(summary["perm"]) == list(range(30))


def test_benchmark_one_cell(cfg_path, tmp_path):
    assert run("benchmark", "--config", cfg_path, "--out", tmp_path) == EXIT_OK
    raw = (tmp_path / "table.csv").read_bytes()
    assert raw.startswith(GOLDEN_TABLE_HEADER)
    assert raw.count(b"\n") == 2
    row = raw.decode().splitlines()[1].split(",")
    assert row[0] == "30" and row[1] == "0.99" and row[6] == "1" and row[7] == ""
    assert (tmp_path / "timing.csv").read_text().splitlines()[0] == "n,alpha,replicate,sec_per_iter"


def test_default_grid_has_twenty_cells():
    grid = read_config(None).grid
    assert len(grid.cells()) == 20


def test_unknown_key_is_config_error(tmp_path):
    bad = tmp_path / "bad.ini"
    bad.write_text("[fit]\nkappa = 0.5\n")
    with pytest.raises(ConfigError):
        read_config(bad)
    assert run("simulate", "--config", bad, "--out", tmp_path / "x") == EXIT_CONFIG
    bad.write_text("[plots]\nx = 1\n")
    assert run("simulate", "--config", bad, "--out", tmp_path / "x") == EXIT_CONFIG
    bad.write_text("[fit]\nalpha = 2\n")
    assert run("simulate", "--config", bad, "--out", tmp_path / "x") == EXIT_CONFIG


def test_dimension_mismatch_is_config_error(cfg_path, tmp_path):
    run("simulate", "--config", cfg_path, "--out", tmp_path / "sim")
    cfg = tmp_path / "d.ini"
    cfg.write_text("[fit]\nd = 7\n")
    assert run("fit", tmp_path / "sim" / "data.csv", "--config", cfg, "--out", tmp_path / "f") == EXIT_CONFIG


def test_io_errors(tmp_path):
    assert run("fit", tmp_path / "missing.csv", "--out", tmp_path / "f") == EXIT_IO
    assert run("simulate", "--config", tmp_path / "missing.ini", "--out", tmp_path / "s") == EXIT_IO
    assert run("summarize", tmp_path) == EXIT_IO
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert run("simulate", "--out", blocker / "sub") == EXIT_IO


def test_example_config_parses():
    example = Path(__file__).resolve().parents[1] / "docs" / "example.ini"
    cfg = read_config(example)
    assert cfg.fit.alpha is None and cfg.fit.priors.k_bound == 6


def write_draws(d, beta):
    d.mkdir(parents=True, exist_ok=True)
    beta = np.atleast_2d(beta)
    (d / "draws_beta.csv").write_text("beta1\n" + "".join(f"{float(v)!r}\n" for v in beta[:, 0]))
    (d / "draws_sigma2.csv").write_text("sigma2\n" + "1.0\n" * beta.shape[0])
    (d / "draws_perm.jsonl").write_text("[0, 1]\n" * beta.shape[0])


def read_hist(path):
    rows = path.read_text().splitlines()
    assert rows[0] == "bin_left,bin_right,count"
    return np.array([[float(x) for x in r.split(",")] for r in rows[1:]])


def test_summarize_single_draw(tmp_path, capsys):
    write_draws(tmp_path, [[0.25]])
    assert main(["summarize", str(tmp_path)]) == EXIT_OK
    h = read_hist(tmp_path / "hist_beta_1.csv")
    assert np.count_nonzero(h[:, 2]) == 1 and h[:, 2].sum() == 1
    assert "beta1" in capsys.readouterr().out


def test_summarize_hand_binning(tmp_path):
    x = np.array([0.0, 1.0, 1.5, 2.0, 2.5, 3.0, 3.5, 4.0, 6.0, 10.0])
    write_draws(tmp_path, x[:, None])
    run("summarize", tmp_path)
    h = read_hist(tmp_path / "hist_beta_1.csv")
    # IQR = 4.0 - 1.625 = 2.375, width = 2 * 2.375 / 10^(1/3) = 2.2047; ceil(10 / 2.2047) = 5 bins of 2
    np.testing.assert_allclose(h[:, 0], [0, 2, 4, 6, 8])
    np.testing.assert_allclose(h[:, 1], [2, 4, 6, 8, 10])
    np.testing.assert_array_equal(h[:, 2], [3, 4, 1, 1, 1])
    assert h[:, 2].sum() == x.size


def test_fd_histogram_counts_sum():
    x = np.random.default_rng(0).normal(size=333)
    counts, edges = fd_histogram(x)
    assert counts.sum() == 333 and edges.size == counts.size + 1
