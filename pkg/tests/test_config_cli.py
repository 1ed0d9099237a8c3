"""Config round-trips and the command line surface.

CLI checks run the installed module in a subprocess so that argument
parsing, exit codes, and the produced files are all exercised exactly the
way a shell user sees them.
"""

import filecmp
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from conftest import tiny_config
from etfcil.cli import main
from etfcil.config import (
    ExperimentConfig,
    build_plan,
    derive_seed,
    emit_config,
    load_config,
    parse_config,
)
from etfcil.errors import ConfigError
from etfcil.metrics import write_feature_dump


def run_cli(*args, **kwargs):
    return subprocess.run(
        [sys.executable, "-m", "etfcil.cli", *args],
        capture_output=True, text=True, **kwargs,
    )


# -- config ----------------------------------------------------------------


def test_emit_parse_round_trip():
    cfg = tiny_config(regime="ltcil", rho=0.125, lt_mode="shuffled",
                      adaptive_lambda=False, hidden_dims=(5, 6, 7))
    assert parse_config(emit_config(cfg)) == cfg


def test_defaults_survive_empty_text():
    assert parse_config("") == ExperimentConfig()
    assert parse_config("[trainer]\nepochs = 3\n").epochs == 3


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError):
        parse_config("[trainer]\nwarp_speed = 9\n")
    with pytest.raises(ConfigError):
        parse_config("[warp]\nx = 1\n")
    with pytest.raises(ConfigError):
        parse_config("[trainer]\nepochs = banana\n")
    with pytest.raises(ConfigError):
        parse_config("[run]\ndeterministic = maybe\n")


def test_validate_catches_contradictions():
    with pytest.raises(ConfigError):
        tiny_config(regime="zil").validate()
    with pytest.raises(ConfigError):
        tiny_config(feature_dim=3).validate()  # narrower than the label space
    with pytest.raises(ConfigError):
        tiny_config(terminus_size=3).validate()  # smaller than classes used
    with pytest.raises(ConfigError):
        tiny_config(base_classes=1).validate()
    with pytest.raises(ConfigError):
        tiny_config(rho=0.0).validate()


def test_k_total_with_oversized_terminus():
    cfg = tiny_config(terminus_size=30, feature_dim=32)
    cfg.validate()
    assert cfg.k_used == 4
    assert cfg.k_total == 30
    assert tiny_config().k_total == 4


def test_derive_seed_streams_are_distinct():
    a = derive_seed(0, 11)
    b = derive_seed(0, 22)
    c = derive_seed(1, 11)
    assert len({a, b, c}) == 3
    assert derive_seed(0, 11) == a


def test_build_plan_dispatch():
    assert build_plan(tiny_config()).sessions[1].mode == "normal"
    assert build_plan(tiny_config(regime="ltcil")).sessions[0].mode == "longtail"
    assert build_plan(tiny_config(regime="fscil", shots=3)).sessions[1].counts == (3, 3)
    gc = build_plan(tiny_config(regime="gcil", seed=4))
    assert gc.n_sessions == 2


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(str(tmp_path / "absent.cfg"))


# -- command line ----------------------------------------------------------


@pytest.fixture()
def cfg_file(tmp_path):
    path = tmp_path / "exp.cfg"
    path.write_text(emit_config(tiny_config()))
    return str(path)


def test_version_flag():
    proc = run_cli("--version")
    assert proc.returncode == 0
    assert proc.stdout.startswith("etfcil ")
    assert "interface" in proc.stdout


def test_run_produces_expected_files(cfg_file, tmp_path):
    out = str(tmp_path / "run")
    proc = run_cli("run", "--config", cfg_file, "--out", out)
    assert proc.returncode == 0, proc.stderr
    lines = proc.stdout.splitlines()
    assert lines[0].startswith("A ") and lines[1].startswith("PD ")
    assert 0.0 <= float(lines[0].split()[1]) <= 1.0
    for name in (
        "metrics_train.csv", "metrics_test.csv", "summary.json", "plan.json",
        "terminus.txt", "features_final_test.txt", "config.cfg",
        "accuracy.png", "diagnostics.png",
    ):
        assert os.path.exists(os.path.join(out, name)), name
    summary = json.load(open(os.path.join(out, "summary.json")))
    assert summary["A"] == pytest.approx(float(lines[0].split()[1]))
    header = open(os.path.join(out, "metrics_test.csv")).readline().strip()
    assert header.split(",")[:2] == ["t", "A_t"]


def test_repeated_runs_are_byte_identical(cfg_file, tmp_path):
    out1, out2 = str(tmp_path / "r1"), str(tmp_path / "r2")
    assert run_cli("run", "--config", cfg_file, "--out", out1).returncode == 0
    assert run_cli("run", "--config", cfg_file, "--out", out2).returncode == 0
    names = sorted(os.listdir(out1))
    assert names == sorted(os.listdir(out2))
    match, mismatch, errors = filecmp.cmpfiles(out1, out2, names, shallow=False)
    assert mismatch == [] and errors == []
    assert sorted(match) == names


def test_seed_override_changes_results(cfg_file, tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    run_cli("run", "--config", cfg_file, "--out", out1)
    run_cli("run", "--config", cfg_file, "--out", out2, "--seed", "9")
    f1 = open(os.path.join(out1, "features_final_test.txt")).read()
    f2 = open(os.path.join(out2, "features_final_test.txt")).read()
    assert f1 != f2


def test_plan_subcommand(cfg_file):
    proc = run_cli("plan", "--config", cfg_file)
    assert proc.returncode == 0
    payload = json.loads(proc.stdout)
    assert payload["sessions"][0]["classes"] == [0, 1]


def test_etf_subcommand_verify():
    proc = run_cli("etf", "--d", "16", "--K", "10", "--verify")
    assert proc.returncode == 0
    report = json.loads(proc.stdout)
    assert report["pass"] is True
    assert report["max_offdiag_dev"] < 1e-10


def test_oracle_subcommand():
    proc = run_cli("oracle", "--K", "4", "--d", "6", "--loss", "ce",
                   "--counts", "8,8,8,8")
    assert proc.returncode == 0
    payload = json.loads(proc.stdout)
    assert payload["converged"] is True
    assert payload["pass"] is True


def test_metrics_subcommand(tmp_path):
    from etfcil.terminus import build_terminus, write_terminus

    t = build_terminus(6, 3, seed=0)
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(3), 5)
    features = t.w.T[labels] + 0.01 * rng.standard_normal((15, 6))
    fpath, tpath = str(tmp_path / "f.txt"), str(tmp_path / "t.txt")
    write_feature_dump(fpath, features, labels)
    write_terminus(t, tpath)
    proc = run_cli("metrics", "--features", fpath, "--terminus", tpath)
    assert proc.returncode == 0
    payload = json.loads(proc.stdout)
    assert payload["self_cos"] > 0.99
    assert payload["trace_ratio"] < 0.01


def test_exit_code_1_for_config_problems(tmp_path):
    proc = run_cli("run", "--config", str(tmp_path / "nope.cfg"),
                   "--out", str(tmp_path / "o"))
    assert proc.returncode == 1
    assert proc.stderr.startswith("ERROR ConfigError:")

    proc = run_cli("etf", "--d", "3", "--K", "10")
    assert proc.returncode == 1
    assert proc.stderr.startswith("ERROR DimensionTooSmall:")

    proc = run_cli("frobnicate")
    assert proc.returncode == 1
    assert "ERROR ConfigError:" in proc.stderr


def test_exit_code_2_for_runtime_invariants(tmp_path):
    # a one-class feature dump defeats the pairwise diagnostics
    fpath = str(tmp_path / "f.txt")
    write_feature_dump(fpath, np.ones((4, 3)) + np.arange(3), np.zeros(4, dtype=int))
    from etfcil.terminus import build_terminus, write_terminus

    tpath = str(tmp_path / "t.txt")
    write_terminus(build_terminus(3, 3, seed=0), tpath)
    proc = run_cli("metrics", "--features", fpath, "--terminus", tpath)
    assert proc.returncode == 2
    assert proc.stderr.startswith("ERROR TooFewClasses:")


def test_main_in_process(cfg_file, capsys):
    assert main(["plan", "--config", cfg_file]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert len(payload["sessions"]) == 2
