import csv
import json
from importlib.resources import files

import numpy as np
import pytest

from chronoctl.cli import main
from chronoctl.config import ConfigError, dump_json, load_config, parse_config
from chronoctl.linsys import transition_backward

FIXTURES = files("chronoctl") / "data"


def write(tmp_path, cfg, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def scalar_cfg(**kw):
    cfg = {
        "timescale": {"kind": "integers", "window": [-4, 0]},
        "direction": "backward",
        "A": [["0"]],
        "B": [["1"]],
        "initial_state": [5],
        "control": ["1"],
    }
    cfg.update(kw)
    return cfg


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_simulate_hand_stepping(tmp_path):
    out = tmp_path / "traj.csv"
    assert main(["simulate", write(tmp_path, scalar_cfg()), str(out)]) == 0
    rows = read_csv(out)
    assert rows[0] == ["s", "y_1", "gamma_1"]
    assert [r[0] for r in rows[1:]] == ["0", "-1", "-2", "-3", "-4"]
    assert [float(r[1]) for r in rows[1:]] == [5, 4, 3, 2, 1]


def test_simulate_homogeneous_matches_transition(tmp_path):
    cfg = scalar_cfg(A=[["-0.5"]], control=["0"], timescale={
        "kind": "periodic_union", "a": 1, "b": 1, "window": [0, 3], "dual": True},
        dense_step=0.25, initial_state=[1])
    path = write(tmp_path, cfg)
    out = tmp_path / "traj.csv"
    assert main(["simulate", path, str(out)]) == 0
    sys = load_config(path).system
    for row in read_csv(out)[1:]:
        assert float(row[1]) == transition_backward(sys, float(row[0]), 0)[0, 0]


def test_simulate_requires_control(tmp_path, capsys):
    cfg = scalar_cfg()
    del cfg["control"]
    assert main(["simulate", write(tmp_path, cfg), str(tmp_path / "x.csv")]) == 2
    assert "control required" in capsys.readouterr().err


@pytest.mark.parametrize(
    "patch",
    [
        {"A": [["s +"]]},
        {"A": [["1", "2"]]},
        {"timescale": {"kind": "integers", "window": [0.2, 0.7]}},
        {"timescale": {"kind": "periodic_union", "window": [0, 5]}},
        {"anchor": 7},
        {"control": ["1", "2"]},
        {"dense_step": -1},
    ],
)
def test_config_errors(tmp_path, patch):
    assert main(["simulate", write(tmp_path, scalar_cfg(**patch)), str(tmp_path / "x.csv")]) == 2


def test_missing_file(tmp_path):
    assert main(["analyze", str(tmp_path / "nope.json")]) == 2


def test_numeric_failure_exit_code(tmp_path):
    cfg = scalar_cfg(A=[["1/s"]])
    assert main(["simulate", write(tmp_path, cfg), str(tmp_path / "x.csv")]) == 3


def analyze(path, capsys, *extra):
    assert main(["analyze", str(path), *extra]) == 0
    return json.loads(capsys.readouterr().out)


def test_analyze_constant_integers(capsys):
    rep = analyze(FIXTURES / "constant_integers.json", capsys, "--test", "controllability")
    assert rep["controllability"]["verdict"] is True
    assert rep["controllability"]["kalman"]["rank"] == 2
    assert "observability" not in rep


def test_analyze_time_varying_union(capsys):
    rep = analyze(FIXTURES / "tv_union.json", capsys, "--sc", "2", "--r", "1",
                  "--test", "controllability")
    tv = rep["controllability"]["time_varying"]
    assert tv["verdict"] == "controllable" and tv["s_c"] == 2


def test_analyze_invariant_union(capsys):
    rep = analyze(FIXTURES / "invariant_union.json", capsys, "--test", "both")
    assert rep["controllability"]["verdict"] and rep["observability"]["verdict"]
    assert rep["dense_step"] == 0.01


def test_dense_step_environment_override(capsys, monkeypatch):
    monkeypatch.setenv("CHRONOCTL_DENSE_STEP", "0.05")
    rep = analyze(FIXTURES / "invariant_union.json", capsys, "--test", "observability")
    assert rep["dense_step"] == 0.05


def test_analyze_rejects_bad_order(capsys):
    assert main(["analyze", str(FIXTURES / "tv_union.json"), "--r", "5"]) == 2


def test_dualize_rules(tmp_path):
    cfg = scalar_cfg(direction="forward", A=[["1"]], B=[["s^2"]], C=[["s^2"]],
                     interval=[-4, 0], control=["exp(s)"])
    del cfg["initial_state"]
    out = tmp_path / "dual.json"
    assert main(["dualize", write(tmp_path, cfg), str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["A"] == [["-(1)"]]
    assert d["B"] == [["-((-s)^2)"]]
    assert d["C"] == [["(-s)^2"]]
    assert d["control"] == ["exp(-s)"]
    assert d["direction"] == "backward"
    assert d["interval"] == [0, 4]
    assert d["timescale"]["dual"] is True


@pytest.mark.parametrize("name", ["tv_union", "constant_integers", "invariant_union"])
def test_double_dualization(tmp_path, name):
    src = str(FIXTURES / f"{name}.json")
    once, twice = tmp_path / "once.json", tmp_path / "twice.json"
    assert main(["dualize", src, str(once)]) == 0
    assert main(["dualize", str(once), str(twice)]) == 0
    a, b = load_config(src).system, load_config(str(twice)).system
    assert a.ts == b.ts and a.anchor == b.anchor and a.horizon == b.horizon
    pts = a.grid.points
    for key in "ABCD":
        assert np.array_equal(getattr(a, key)(pts), getattr(b, key)(pts))


def test_realize_invariant_union(capsys, tmp_path):
    assert main(["realize", str(FIXTURES / "invariant_union.json"), "--export", str(tmp_path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["minimal"] is True
    assert rep["factorization"]["separable_rank"] == 2
    assert rep["progressive"]["holds"] is False
    assert (tmp_path / "factor_H.csv").exists()


def test_realize_uncontrollable(tmp_path, capsys):
    cfg = scalar_cfg(A=[["1", "0"], ["0", "2"]], B=[["1"], ["0"]], initial_state=[0, 0],
                     timescale={"kind": "integers", "window": [-6, 0]})
    assert main(["realize", write(tmp_path, cfg)]) == 0
    assert json.loads(capsys.readouterr().out)["minimal"] is False


def test_realize_hypothesis_violation(capsys):
    assert main(["realize", str(FIXTURES / "tv_union.json")]) == 4
    assert "progressivity hypothesis violated" in capsys.readouterr().err


def test_timing_is_opt_in(capsys):
    rep = analyze(FIXTURES / "constant_integers.json", capsys)
    assert "wall_time" not in rep
    rep = analyze(FIXTURES / "constant_integers.json", capsys, "--timing")
    assert rep["wall_time"] >= 0


def test_dump_json_format():
    text = dump_json({"a": 0.1, "b": [1, 2.5], "c": None, "d": float("nan"), "e": -0.0})
    assert json.loads(text) == {"a": 0.1, "b": [1, 2.5], "c": None, "d": None, "e": 0}
    assert '"a": 0.10000000000000001' in text


def test_parse_config_interval_conflict():
    with pytest.raises(ConfigError):
        parse_config(scalar_cfg(anchor=-1, interval=[-4, 0]))
