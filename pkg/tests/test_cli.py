"""Config files and the command-line entry point."""

import json

import numpy as np
import pytest

from armpc.cli import main
from armpc.config import (
    ConfigError,
    build_experiment,
    config_hash,
    load_config,
    sweep_targets,
)
from armpc.mpc import SolverError

MATCHED_TOML = """
[plant]
preset = "matched"
w1 = 0.5
sigma2 = 5e-3

[estimator]
kind = "set-membership"
delta = 0.05
warm_k = 45
prior_bound = 2.5

[mpc]
N = 3
Q = [[1.0, 0.0], [0.0, 1.0]]
R = [[1.0]]

[run]
steps = 5
episodes = 1
seed = 0

[sweep]
seeds = 2
"""


@pytest.fixture
def matched_cfg(tmp_path):
    path = tmp_path / "matched.toml"
    path.write_text(MATCHED_TOML)
    return path


# ---------------------------------------------------------------- loading

def test_load_toml(matched_cfg):
    cfg = load_config(matched_cfg)
    assert cfg.plant["preset"] == "matched"
    assert cfg.mpc["N"] == 3
    assert cfg.run["steps"] == 5


def test_json_config_equivalent(matched_cfg, tmp_path):
    import toml
    data = toml.loads(MATCHED_TOML)
    json_path = tmp_path / "matched.json"
    json_path.write_text(json.dumps(data))
    assert config_hash(load_config(json_path)) == \
        config_hash(load_config(matched_cfg))


def test_hash_stable_and_sensitive(matched_cfg, tmp_path):
    base = config_hash(load_config(matched_cfg))
    assert base == config_hash(load_config(matched_cfg))
    assert len(base) == 16
    int(base, 16)
    other = tmp_path / "other.toml"
    other.write_text(MATCHED_TOML.replace("w1 = 0.5", "w1 = 0.6"))
    assert config_hash(load_config(other)) != base


def test_unknown_section_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(MATCHED_TOML + "\n[extra]\nfoo = 1\n")
    with pytest.raises(ConfigError):
        load_config(path)


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(MATCHED_TOML.replace("w1 = 0.5", "w1 = 0.5\nfoo = 1.0"))
    with pytest.raises(ConfigError):
        load_config(path)


def test_missing_required_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(MATCHED_TOML.replace("N = 3\n", ""))
    with pytest.raises(ConfigError):
        load_config(path)


def test_wrong_type_rejected(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(MATCHED_TOML.replace("N = 3", 'N = "three"'))
    with pytest.raises(ConfigError):
        load_config(path)


def test_toml_syntax_error_names_file(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text("[plant\npreset = matched")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config(path)


def test_quadrotor_keys_rejected_on_integrator(tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text(MATCHED_TOML.replace("w1 = 0.5", "w1 = 0.5\nv0 = 3.0"))
    with pytest.raises(ConfigError):
        build_experiment(load_config(path))


def test_build_experiment_matches_preset(matched_cfg):
    exp, wind = build_experiment(load_config(matched_cfg))
    assert wind is None
    assert exp.steps == 5
    assert exp.mpc.N == 3
    np.testing.assert_allclose(exp.plant.W_true, [[0.0], [0.5]])


def test_shipped_configs_load():
    for name in ("matched", "unmatched", "quadrotor"):
        cfg = load_config(f"configs/{name}.toml")
        exp, wind = build_experiment(cfg)
        assert exp.name == name
        assert (wind is not None) == (name == "quadrotor")
    quad = load_config("configs/quadrotor.toml")
    exp, _ = build_experiment(quad)
    assert exp.mpc.n == 6
    assert exp.mpc.N == 10


def test_sweep_targets(matched_cfg):
    cfg = load_config(matched_cfg)
    assert sweep_targets(cfg, "w1") == ("plant", "w1")
    with pytest.raises(ConfigError):
        sweep_targets(cfg, "drag")


# ------------------------------------------------------------ run command

def test_run_writes_trace_and_sidecars(matched_cfg, tmp_path):
    out = tmp_path / "trace.csv"
    assert main(["run", str(matched_cfg), "--seed", "3",
                 "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert len(lines) == 1 + 5 + 1  # header, five steps, terminal record
    assert lines[0].split(",")[:4] == ["t", "x_0", "x_1", "u_0"]
    summary = json.loads((tmp_path / "trace.summary.json").read_text())
    assert summary["name"] == "matched"
    assert summary["seed"] == 3
    assert summary["feasible"] is True
    assert len(summary["episodes"]) == 1
    sets = json.loads((tmp_path / "trace.sets.json").read_text())
    assert set(sets) == {"tubes", "terminal_set", "state_set"}
    assert len(sets["tubes"]) == 3 + 1  # one box per horizon stage


def test_run_prints_summary_without_out(matched_cfg, capsys):
    assert main(["run", str(matched_cfg)]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["config_hash"] == config_hash(load_config(matched_cfg))


def test_run_controller_override(matched_cfg, capsys):
    assert main(["run", str(matched_cfg), "--controller", "naive"]) == 0
    assert json.loads(capsys.readouterr().out)["controller"] == "naive"


def test_run_config_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.toml"
    path.write_text(MATCHED_TOML.replace("N = 3\n", ""))
    assert main(["run", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_run_missing_file_exit_code(tmp_path):
    assert main(["run", str(tmp_path / "nope.toml")]) == 2


def test_solver_error_exit_code(matched_cfg, monkeypatch, capsys):
    import armpc.cli as cli

    def boom(args):
        raise SolverError("backend gave up")

    monkeypatch.setattr(cli, "cmd_run", boom)
    assert cli.main(["run", str(matched_cfg)]) == 3
    assert "solver error" in capsys.readouterr().err


# ---------------------------------------------------------- sweep command

def test_sweep_csv_contract(matched_cfg, tmp_path):
    out = tmp_path / "sweep.csv"
    assert main(["sweep", str(matched_cfg), "--param", "w1",
                 "--values", "0.3,0.5", "--out", str(out)]) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "param,n_seeds,n_feasible,cost_mean,cost_2sigma"
    assert len(lines) == 3
    for line in lines[1:]:
        fields = line.split(",")
        assert float(fields[1]) == 2
        assert 0 <= int(fields[2]) <= 2
        if int(fields[2]) > 0:
            assert float(fields[3]) > 0


def test_sweep_empty_values_exit_code(matched_cfg):
    assert main(["sweep", str(matched_cfg), "--param", "w1",
                 "--values", ""]) == 2


def test_sweep_unknown_param_exit_code(matched_cfg):
    assert main(["sweep", str(matched_cfg), "--param", "drag",
                 "--values", "0.5"]) == 2


# ------------------------------------------------------- envelope command

def test_envelope_json_contract(matched_cfg, tmp_path):
    out = tmp_path / "env.json"
    assert main(["envelope", str(matched_cfg), "--param", "w1",
                 "--values", "0.5", "--grid", "9", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["param"] == "w1"
    assert data["grid"] == 9
    for controller in ("ce", "benchmark"):
        fractions = data[controller]
        assert set(fractions) == {"0.5"}
        assert 0.0 <= fractions["0.5"] <= 1.0
        assert "0.5" in data["hulls"][controller]
    assert data["ce"]["0.5"] >= data["benchmark"]["0.5"]
