"""Config validation, experiment runners, exit codes, determinism."""

import json
from pathlib import Path

import pytest

from ergoqueue import cli

MM1_DOC = """
[environment]
family = "iid"
[environment.iid_law]
family = "exponential"
rate = 1.0

[service]
family = "exponential"
rate = 2.0

[experiment]
kind = "{kind}"
seed = 99
out_dir = "{out}"
{extra}
"""


def write_config(tmp_path, kind, extra="", name="cfg.toml", doc=MM1_DOC):
    path = tmp_path / name
    path.write_text(doc.format(kind=kind, out=tmp_path / "out", extra=extra))
    return path


def test_validate_ok(tmp_path):
    path = write_config(tmp_path, "simulate", "horizon = 100")
    assert cli.validate(path) == []
    assert cli.main(["validate", "--config", str(path)]) == 0


def test_validate_missing_seed(tmp_path):
    doc = MM1_DOC.replace("seed = 99\n", "")
    path = write_config(tmp_path, "simulate", doc=doc)
    violations = cli.validate(path)
    assert any("seed" in v for v in violations)
    assert cli.main(["validate", "--config", str(path)]) == 2


def test_validate_non_stochastic_matrix(tmp_path):
    doc = """
[environment]
family = "markov_modulated"
states = [1.0, 3.0]
transition = [[0.6, 0.5], [0.5, 0.5]]

[service]
family = "exponential"
rate = 2.0

[experiment]
kind = "simulate"
seed = 1
"""
    path = tmp_path / "bad.toml"
    path.write_text(doc)
    violations = cli.validate(path)
    assert any("sum to 1" in v for v in violations)


def test_validate_unknown_key_rejected(tmp_path):
    path = write_config(tmp_path, "simulate", "horizon = 10\nbogus_key = 3")
    assert any("bogus_key" in v for v in cli.validate(path))


def test_unreadable_config_exit_2(tmp_path):
    missing = tmp_path / "nope.toml"
    assert cli.main(["validate", "--config", str(missing)]) == 2
    assert cli.main(["simulate", "--config", str(missing)]) == 2


def test_simulate_writes_trajectory_and_manifest(tmp_path):
    path = write_config(tmp_path, "simulate", "horizon = 50")
    assert cli.main(["simulate", "--config", str(path)]) == 0
    out = tmp_path / "out"
    lines = (out / "trajectory.csv").read_text().splitlines()
    assert lines[0] == "step,wait" and len(lines) == 52
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["passed"] and manifest["seed"] == 99
    assert manifest["outputs"] == ["trajectory.csv"]


def test_simulate_supercritical_exit_3(tmp_path):
    doc = """
[environment]
family = "iid"
[environment.iid_law]
family = "constant"
value = 1.0

[service]
family = "deterministic"
value = 2.0

[experiment]
kind = "simulate"
seed = 1
out_dir = "{out}"
"""
    path = tmp_path / "super.toml"
    path.write_text(doc.format(out=tmp_path / "out"))
    assert cli.main(["simulate", "--config", str(path)]) == 3


def test_certify_demo_passes(tmp_path):
    path = write_config(tmp_path, "certify", "drift_grid = 10\nminor_w_points = 10")
    assert cli.main(["certify", "--config", str(path)]) == 0
    doc = json.loads((tmp_path / "out" / "certificate.json").read_text())
    assert doc["certificate"]["gamma_bar"] == pytest.approx(8.0 / 9.0, abs=1e-9)
    assert all(r["passed"] for r in doc["reports"])


def test_certify_copula_exit_3(tmp_path):
    doc = """
[environment]
family = "copula_ar1"
ar_coefficient = 0.5
[environment.marginal]
family = "uniform"
a = 0.5
b = 1.5

[service]
family = "exponential"
rate = 2.0

[experiment]
kind = "certify"
seed = 1
out_dir = "{out}"
"""
    path = tmp_path / "cop.toml"
    path.write_text(doc.format(out=tmp_path / "out"))
    assert cli.main(["certify", "--config", str(path)]) == 3


def test_ge_limit_outputs(tmp_path):
    extra = "alphas = [-0.2, 0.2]\ncgf_n = 10\nreplicas = 20000"
    path = write_config(tmp_path, "ge-limit", extra)
    assert cli.main(["ge-limit", "--config", str(path)]) == 0
    lines = (tmp_path / "out" / "ge_limit.csv").read_text().splitlines()
    assert lines[0] == "alpha,exact,estimate,stderr" and len(lines) == 3


def test_loynes_compare_outputs(tmp_path):
    extra = "replicas = 5000\nhorizon = 2000\nloynes_horizon = 500"
    path = write_config(tmp_path, "loynes-compare", extra)
    assert cli.main(["loynes-compare", "--config", str(path)]) == 0
    doc = json.loads((tmp_path / "out" / "loynes_compare.json").read_text())
    assert doc["stabilized"] and doc["ks"] <= doc["ks_tol"]


def test_tv_decay_outputs(tmp_path):
    extra = "replicas = 2000\nn_grid = [1, 2, 5]\nn_star = 200"
    path = write_config(tmp_path, "tv-decay", extra)
    rc = cli.main(["tv-decay", "--config", str(path)])
    assert rc in (0, 1)  # fit may not find 4 usable points at this size
    lines = (tmp_path / "out" / "tv_decay.csv").read_text().splitlines()
    assert lines[0] == "n,tv,stderr" and len(lines) == 4


def test_borovkov_outputs(tmp_path):
    extra = "replicas = 2000\nn_grid = [2, 5]\nn_star = 200\nloynes_horizon = 300"
    path = write_config(tmp_path, "borovkov", extra)
    assert cli.main(["borovkov", "--config", str(path)]) == 0
    lines = (tmp_path / "out" / "borovkov.csv").read_text().splitlines()
    assert lines[0] == "n,tv,rhs,margin"


def test_lln_outputs(tmp_path):
    extra = "replicas = 64\nn_grid = [100, 400]\nw0 = 1.0\nloynes_horizon = 400"
    path = write_config(tmp_path, "lln", extra)
    assert cli.main(["lln", "--config", str(path)]) == 0
    lines = (tmp_path / "out" / "lln.csv").read_text().splitlines()
    assert lines[0] == "n,mean,stdev,ref"


def test_seed_override_changes_output(tmp_path):
    path = write_config(tmp_path, "simulate", "horizon = 50")
    cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "a")])
    cli.main(["simulate", "--config", str(path), "--out", str(tmp_path / "b"), "--seed", "7"])
    a = (tmp_path / "a" / "trajectory.csv").read_bytes()
    b = (tmp_path / "b" / "trajectory.csv").read_bytes()
    assert a != b


def test_rerun_byte_identical(tmp_path):
    extra = "replicas = 2000\nn_grid = [1, 5]\nn_star = 100"
    path = write_config(tmp_path, "tv-decay", extra)
    cli.main(["tv-decay", "--config", str(path), "--out", str(tmp_path / "a")])
    cli.main(["tv-decay", "--config", str(path), "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "tv_decay.csv").read_bytes() == (
        tmp_path / "b" / "tv_decay.csv"
    ).read_bytes()


def test_worker_count_does_not_change_outputs(tmp_path):
    extra = "replicas = 3000\nn_grid = [1, 5, 20]\nn_star = 300"
    path = write_config(tmp_path, "tv-decay", extra)
    outs = []
    for w in (1, 4, 16):
        out = tmp_path / f"w{w}"
        cli.main(["tv-decay", "--config", str(path), "--out", str(out), "--workers", str(w)])
        outs.append((out / "tv_decay.csv").read_bytes())
    assert outs[0] == outs[1] == outs[2]
