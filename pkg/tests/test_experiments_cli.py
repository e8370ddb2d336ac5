import csv
import json
import math

import numpy as np
import pytest

from pgconv import cli
from pgconv import experiments as ex
from pgconv import tabular_mdp as tm
from pgconv.errors import ConfigError, DomainError


def _rows(path):
    lines = [ln for ln in path.read_text().splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return p


MDP_CFG = {"family": "mdp", "problem": {"random": {"dims": [3, 2], "gamma": 0.8}}, "method": "entropy_npg",
           "params": {"learning_rate": 0.5, "tau": 0.1}, "iterations": 40, "seed": 7}


def test_fig1_preset(tmp_path):
    paths = ex.run_preset("fig1-bandit", tmp_path)
    assert [p.name for p in paths] == ["fig1-bandit-pg.csv", "fig1-bandit-npg.csv"]
    pg_rows, npg_rows = _rows(paths[0]), _rows(paths[1])
    assert len(pg_rows) == len(npg_rows) == 201
    assert pg_rows[0]["iter"] == "0"
    # NPG reaches the regularized optimum much faster than PG
    assert float(npg_rows[100]["gap_sup"]) < 1e-10 < 1e-3 < float(pg_rows[100]["gap_sup"])
    text = paths[0].read_text()
    assert "# seed=0" in text and "# pgconv " in text


def test_fig2_preset_cycles(tmp_path):
    path, = ex.run_preset("fig2-rps", tmp_path)
    rows = _rows(path)
    assert len(rows) == 1001
    mu1 = np.array([float(r["mu_1"]) for r in rows])
    assert mu1[0] == 0.4
    # MWU does not settle: the first coordinate keeps oscillating away from 1/3
    assert np.max(np.abs(mu1[-200:] - 1 / 3)) > 0.05
    assert np.sum(np.diff(np.sign(mu1 - 1 / 3)) != 0) >= 4


def test_zero_iteration_run(tmp_path):
    cfg = ex.ExperimentConfig.from_dict({**MDP_CFG, "iterations": 0})
    rows = _rows(ex.run(cfg, tmp_path))
    assert len(rows) == 1 and rows[0]["iter"] == "0"


@pytest.mark.parametrize("cfg", [
    MDP_CFG,
    {"family": "matrix_game", "problem": {"random": {"dims": [3, 4]}}, "method": "reg_omwu",
     "params": {"eta": 0.2, "tau": 0.1}, "iterations": 30, "seed": 1},
    {"family": "markov_game", "problem": {"random": {"dims": [2, 2, 2], "gamma": 0.5}}, "method": "actor_critic",
     "params": {"tau": 0.1}, "iterations": 20, "seed": 2},
    {"family": "lqr", "problem": {"random": {"dims": [3, 2]}}, "method": "npg", "iterations": 20, "seed": 3},
])
def test_runs_are_deterministic(tmp_path, cfg):
    c = ex.ExperimentConfig.from_dict(cfg)
    a = ex.run(c, tmp_path / "a").read_bytes()
    b = ex.run(c, tmp_path / "b").read_bytes()
    assert a == b
    assert f"# config_hash={c.digest()}".encode() in a


def test_lqr_run_from_data(tmp_path):
    cfg = {"family": "lqr", "problem": {"preset": "scalar"}, "method": "gauss_newton",
           "params": {"K0": [[1.5]], "learning_rate": 1.0}, "iterations": 10}
    rows = _rows(ex.run(ex.ExperimentConfig.from_dict(cfg), tmp_path))
    assert float(rows[-1]["gap"]) <= 1e-12
    assert float(rows[0]["cost"]) > float(rows[-1]["cost"])


def test_problem_from_file(tmp_path):
    mdp = tm.TabularMdp.bandit(np.array([1.0, 0.5]))
    prob = tmp_path / "mdp.json"
    prob.write_text(mdp.to_json())
    cfg = {**MDP_CFG, "problem": {"file": str(prob)}}
    rows = _rows(ex.run(ex.ExperimentConfig.from_dict(cfg), tmp_path))
    assert len(rows) == 41


@pytest.mark.parametrize("bad", [
    {"family": "chess"},
    {"method": "sgd"},
    {"problem": {"random": {"dims": [3]}}},
    {"problem": {"file": "/nonexistent/problem.json"}},
    {"params": {"learning_rate": -1.0, "tau": 0.1}},
    {"iterations": -1},
    {"extra_key": 1},
])
def test_invalid_configs(tmp_path, bad):
    with pytest.raises(ConfigError):
        cfg = ex.ExperimentConfig.from_dict({**MDP_CFG, **bad})
        ex.run(cfg, tmp_path)


def test_cli_run_and_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, MDP_CFG)
    assert cli.main(["run", "--config", str(good), "--output-dir", str(tmp_path / "out")]) == 0
    assert capsys.readouterr().out.strip().endswith(".csv")
    bad = _write(tmp_path, {**MDP_CFG, "method": "sgd"}, "bad.json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    assert cli.main(["run", "--config", str(tmp_path / "missing.json")]) == 2
    assert cli.main(["run"]) == 2
    assert cli.main(["frobnicate"]) == 2
    # a learning rate that destabilizes the closed loop is a numerical failure
    unstable = _write(tmp_path, {"family": "lqr", "problem": {"preset": "scalar"}, "method": "pg",
                                 "params": {"K0": [[1.5]], "learning_rate": 10.0}, "iterations": 5}, "u.json")
    assert cli.main(["run", "--config", str(unstable), "--output-dir", str(tmp_path)]) == 3


def test_cli_preset_uses_env_output_dir(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("PGCONV_OUTPUT_DIR", str(tmp_path / "env"))
    assert cli.main(["run", "--preset", "fig2-rps"]) == 0
    assert (tmp_path / "env" / "fig2-rps-mwu.csv").exists()


def test_rate_fit_examples():
    t = np.arange(50)
    fit = ex.rate_fit(t, 0.9 ** t, 0, 49)
    assert abs(fit.factor - 0.9) <= 1e-9 and fit.r_squared == pytest.approx(1.0, abs=1e-12)
    assert ex.rate_fit(t, np.full(50, 0.3), 0, 49).factor == pytest.approx(1.0, abs=1e-15)
    errs = 0.9 ** t
    errs[10] = 0.0
    with pytest.raises(DomainError):
        ex.rate_fit(t, errs, 0, 20)
    with pytest.raises(DomainError):
        ex.rate_fit(t, 0.9 ** t, 20, 20)


def test_rate_fit_on_entropy_npg_trace(tmp_path, capsys):
    eta, tau = 0.5, 0.1
    cfg = {**MDP_CFG, "iterations": 400, "params": {"learning_rate": eta, "tau": tau}}
    path = ex.run(ex.ExperimentConfig.from_dict(cfg), tmp_path)
    rows = _rows(path)
    gaps = np.array([float(r["gap_sup"]) for r in rows])
    last = int(np.nonzero(gaps > 1e-12)[0][-1])
    fit = ex.rate_fit_file(path, 5, last)
    assert fit.factor <= 1 - eta * tau + 0.02
    assert cli.main(["rate-fit", "--trace", str(path), "--from", "5", "--to", str(last)]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["factor"] == pytest.approx(fit.factor)
    assert cli.main(["rate-fit", "--trace", str(path), "--from", "0", "--to", "400", "--column", "nope"]) == 2


def test_cli_check_suite(capsys):
    assert cli.main(["check", "--suite", "core_numeric"]) == 0
    out = capsys.readouterr().out
    assert "PASS" in out
    assert cli.main(["check", "--suite", "tabular_mdp", "--json"]) == 0
    for line in capsys.readouterr().out.strip().splitlines():
        assert json.loads(line)["passed"] is True
