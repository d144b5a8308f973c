import os
import subprocess
import sys

import numpy as np
import pytest

from plr.cli import ConfigError, ExperimentConfig, main, parse_config
from plr.core import load_dense_csv

COMPLETION_CFG = """\
# tiny synthetic completion experiment
mode = complete
source = synthetic
d1 = 8
d2 = 6
rank = 2
alpha = 30
beta = 1
m = 36
seed = 5
solver = pmlsvt
max_iter = 200
step_recip = 1e-3
step_scale = 1.1
lambda = 0.01
"""

RECOVERY_CFG = """\
mode = recover
source = synthetic
d1 = 6
d2 = 5
rank = 2
alpha = 30
beta = 1
entry_floor = 1e-6
m = 40
p = 0.5
seed = 9
solver = pmlsvt
max_iter = 150
step_recip = 1e-4
step_scale = 1.1
lambda = 0.01
"""


def write_cfg(tmp_path, text, name="exp.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_outputs(out_dir, skip_wall_time=True):
    """All output files as bytes, with the wall-time metric line dropped."""
    out = {}
    for name in sorted(os.listdir(out_dir)):
        data = open(os.path.join(out_dir, name), "rb").read()
        if skip_wall_time and name == "metrics.txt":
            data = b"\n".join(l for l in data.splitlines()
                              if not l.startswith(b"wall_time_s="))
        out[name] = data
    return out


class TestParseConfig:
    def test_basic_and_comments(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("a = 1  # trailing\n# full comment\n\nb=two\n")
        assert parse_config(path) == {"a": "1", "b": "two"}

    def test_duplicate_key(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("a = 1\na = 2\n")
        with pytest.raises(ConfigError, match="duplicate"):
            parse_config(path)

    def test_missing_equals(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("just a line\n")
        with pytest.raises(ConfigError, match="key = value"):
            parse_config(path)


class TestExperimentConfig:
    def test_validation_requires_source_fields(self, tmp_path):
        cfg = write_cfg(tmp_path, "mode = complete\nsource = synthetic\nd1 = 4\n")
        ec = ExperimentConfig.from_file(cfg)
        with pytest.raises(ConfigError, match="d2"):
            ec.validate()

    def test_referenced_files_must_exist(self, tmp_path):
        cfg = write_cfg(tmp_path, (
            "mode = complete\nsource = matrix\nmatrix_file = nope.csv\n"
            "alpha = 2\nbeta = 1\nm = 4\n"))
        with pytest.raises(ConfigError, match="does not exist"):
            ExperimentConfig.from_file(cfg).validate()

    def test_single_run_rejects_sweep_axis(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG + "sweep_axis = rho\nsweep_values = 1,2\n")
        with pytest.raises(ConfigError, match="single experiment"):
            ExperimentConfig.from_file(cfg).validate()

    def test_seed_override(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG)
        ec = ExperimentConfig.from_file(cfg, seed_override=77)
        assert ec.seed == 77 and ec.obs_seed == 77


class TestSynthSolvePipeline:
    def test_completion_synth_is_reproducible(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG)
        assert main(["synth", "--config", cfg, "--out", str(tmp_path / "a")]) == 0
        assert main(["synth", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
        assert read_outputs(tmp_path / "a") == read_outputs(tmp_path / "b")
        assert set(read_outputs(tmp_path / "a")) == {"M.csv", "obs.csv"}

    def test_solve_from_synth_files(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG)
        main(["synth", "--config", cfg, "--out", str(tmp_path / "s")])
        solve_cfg = write_cfg(tmp_path, (
            "mode = complete\nsource = matrix\n"
            f"matrix_file = {tmp_path / 's' / 'M.csv'}\n"
            f"obs_file = {tmp_path / 's' / 'obs.csv'}\n"
            "alpha = 30\nbeta = 1\nrank_budget = 2\nseed = 5\n"
            "solver = pmlsvt\nmax_iter = 200\nstep_recip = 1e-3\nlambda = 0.01\n"),
            name="solve.cfg")
        assert main(["solve", "--config", solve_cfg, "--out", str(tmp_path / "r1")]) == 0
        assert main(["solve", "--config", solve_cfg, "--out", str(tmp_path / "r2")]) == 0
        out1 = read_outputs(tmp_path / "r1")
        out2 = read_outputs(tmp_path / "r2")
        assert out1 == out2
        assert set(out1) == {"Mhat.csv", "trace.csv", "metrics.txt"}
        Mhat = load_dense_csv(tmp_path / "r1" / "Mhat.csv")
        assert Mhat.shape == (8, 6) and Mhat.min() >= 1.0 and Mhat.max() <= 30.0
        metrics = (tmp_path / "r1" / "metrics.txt").read_text()
        for key in ("R=", "normalized_error=", "kl=", "hellinger=", "wall_time_s="):
            assert key in metrics

    def test_recovery_regen_from_seed_matches_stored_masks(self, tmp_path):
        cfg = write_cfg(tmp_path, RECOVERY_CFG)
        main(["synth", "--config", cfg, "--out", str(tmp_path / "full")])
        assert (tmp_path / "full" / "ensemble.bin").exists()
        main(["synth", "--config", cfg, "--out", str(tmp_path / "lean"),
              "--regen-from-seed"])
        assert not (tmp_path / "lean" / "ensemble.bin").exists()
        assert (tmp_path / "lean" / "ensemble.meta").exists()
        assert (tmp_path / "full" / "y.csv").read_bytes() == \
            (tmp_path / "lean" / "y.csv").read_bytes()

        base = ("mode = recover\nsource = matrix\n"
                f"matrix_file = {tmp_path / 'full' / 'M.csv'}\n"
                f"y_file = {tmp_path / 'full' / 'y.csv'}\n"
                "alpha = 30\nbeta = 1\nrank_budget = 2\nseed = 9\n"
                "solver = pmlsvt\nmax_iter = 150\nstep_recip = 1e-4\nlambda = 0.01\n")
        cfg_bin = write_cfg(tmp_path, base +
                            f"ensemble_file = {tmp_path / 'full' / 'ensemble.bin'}\n",
                            name="bin.cfg")
        cfg_meta = write_cfg(tmp_path, base +
                             f"ensemble_meta = {tmp_path / 'lean' / 'ensemble.meta'}\n",
                             name="meta.cfg")
        assert main(["solve", "--config", cfg_bin, "--out", str(tmp_path / "rb")]) == 0
        assert main(["solve", "--config", cfg_meta, "--out", str(tmp_path / "rm")]) == 0
        assert (tmp_path / "rb" / "Mhat.csv").read_bytes() == \
            (tmp_path / "rm" / "Mhat.csv").read_bytes()

    def test_image_source_completion(self, tmp_path, data_dir):
        cfg = write_cfg(tmp_path, (
            "mode = complete\nsource = image\n"
            f"image_file = {data_dir}/phantom16.pgm\n"
            "patch_h = 4\npatch_w = 4\ntrunc_rank = 3\n"
            "alpha = 255\nbeta = 1\np_obs = 0.8\nseed = 3\n"
            "solver = pmlsvt\nmax_iter = 100\nstep_recip = 1e-3\nlambda = 0.1\n"))
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "img")]) == 0
        Mhat = load_dense_csv(tmp_path / "img" / "Mhat.csv")
        assert Mhat.shape == (16, 16)

    def test_full_observation_synth_has_all_rows(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG.replace("m = 36\n", "p_obs = 1.0\n"))
        assert main(["synth", "--config", cfg, "--out", str(tmp_path / "full")]) == 0
        rows = (tmp_path / "full" / "obs.csv").read_text().splitlines()
        assert len(rows) == 1 + 8 * 6  # header + every entry

    def test_image_synth_matches_patch_dims(self, tmp_path, data_dir):
        cfg = write_cfg(tmp_path, (
            "mode = complete\nsource = image\n"
            f"image_file = {data_dir}/solar48.pgm\n"
            "patch_h = 8\npatch_w = 8\ntrunc_rank = 10\n"
            "alpha = 200\nbeta = 1\np_obs = 0.5\nseed = 2\n"))
        assert main(["synth", "--config", cfg, "--out", str(tmp_path / "img")]) == 0
        M = load_dense_csv(tmp_path / "img" / "M.csv")
        assert M.shape == (64, 36)

    def test_counts_source_reports_observed_fit(self, tmp_path, data_dir):
        cfg = write_cfg(tmp_path, (
            "mode = complete\nsource = counts\n"
            f"counts_file = {data_dir}/bike_toy.csv\n"
            "alpha = 1000\nbeta = 1\np_obs = 0.5\nseed = 4\n"
            "solver = pmlsvt\nmax_iter = 100\nstep_recip = 1e-4\nlambda = 10\n"))
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "bike")]) == 0
        metrics = (tmp_path / "bike" / "metrics.txt").read_text()
        assert "R_observed=" in metrics and "kl=nan" in metrics


class TestSweep:
    def test_sweep_csv_sorted_and_thread_invariant(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG.replace("m = 36\n", "") + (
            "sweep_axis = p_obs\nsweep_values = 0.9,0.6\ntrials = 2\n"))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s1"),
                     "--threads", "1"]) == 0
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "s2"),
                     "--threads", "2"]) == 0
        text = (tmp_path / "s1" / "sweep.csv").read_text().splitlines()
        assert text[0] == "value,mean,std"
        values = [float(line.split(",")[0]) for line in text[1:]]
        assert values == sorted(values) and len(values) == 2
        assert (tmp_path / "s1" / "sweep.csv").read_bytes() == \
            (tmp_path / "s2" / "sweep.csv").read_bytes()

    def test_sweep_requires_axis(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG)
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_lambda_sweep_runs(self, tmp_path):
        cfg = write_cfg(tmp_path, COMPLETION_CFG.replace("lambda = 0.01\n", "") + (
            "sweep_axis = lambda\nsweep_values = 0.01,1.0\ntrials = 1\n"))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "lam")]) == 0


class TestErrorPaths:
    def test_bad_config_exits_nonzero(self, tmp_path):
        cfg = write_cfg(tmp_path, "mode = complete\n")
        assert main(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == 2

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "none.cfg"),
                     "--out", str(tmp_path / "x")]) == 2

    def test_env_threads_fallback(self, tmp_path, monkeypatch):
        monkeypatch.setenv("PLR_THREADS", "2")
        cfg = write_cfg(tmp_path, COMPLETION_CFG.replace("m = 36\n", "") + (
            "sweep_axis = p_obs\nsweep_values = 0.8\ntrials = 1\n"))
        assert main(["sweep", "--config", cfg, "--out", str(tmp_path / "env")]) == 0


def test_module_entrypoint_runs(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(COMPLETION_CFG)
    proc = subprocess.run(
        [sys.executable, "-m", "plr.cli", "synth", "--config", str(cfg),
         "--out", str(tmp_path / "out")],
        capture_output=True, text=True, cwd="/root/pkg")
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "out" / "M.csv").exists()
