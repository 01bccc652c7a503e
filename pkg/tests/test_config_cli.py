from __future__ import annotations

import math

import numpy as np
import pytest

from hydrovdc.cli import main
from hydrovdc.config import config_document, default_config_text, dumps_config, load_config, loads_config, write_config
from hydrovdc.errors import ParseError, ValidationError
from hydrovdc.kinematics import resolve_frames
from hydrovdc.tracefile import read_trace_csv

MINIMAL = """
model:
  gravity: [0, 0, 0]
  structures:
    - revolute: {L_j: 0.5, L_j1: 0.4, x_j0: 0.45, l_cj: 0.3, s_j: 0.35}
      actuator: {A_a: 1.0e-3, A_b: 6.0e-4, c_p1: 3.0e-8, c_p2: 3.0e-8, c_n1: 3.0e-8, c_n2: 3.0e-8}
      attach: {offset: [0.7, 0, 0]}
    - revolute: {L_j: 0.4, L_j1: 0.3, x_j0: 0.35, l_cj: 0.25, s_j: 0.3}
      actuator: {A_a: 6.0e-4, A_b: 3.5e-4, valve: {rated_flow_lpm: 100, rated_dp_bar: 35}}
gains:
  structures: [{}, {}]
scenario:
  path: {waypoints: [[1.5, -0.25]]}
"""


def test_minimal_config_loads():
    cfg = loads_config(MINIMAL)
    assert cfg.model.n == 2
    resolve_frames(cfg.model)
    assert cfg.model.structures[0].bodies.link.mass == 0.0
    a = cfg.model.structures[1].actuator
    assert a.c_p1 == pytest.approx((100 / 60000) / (10 * math.sqrt(35e5)), rel=1e-15)
    assert a.beta == 1.4e9 and a.p_s == 185e5 and a.p_r == 10e5


def test_exponent_floats_without_dot_are_numbers():
    cfg = loads_config(MINIMAL.replace("A_a: 1.0e-3", "A_a: 1e-3"))
    assert cfg.model.structures[0].actuator.A_a == 1e-3


def _problems(text):
    with pytest.raises(ValidationError) as info:
        loads_config(text)
    return info.value.problems


def test_validation_errors_name_the_key_path():
    probs = _problems(MINIMAL.replace("L_j: 0.5,", "L_j: -0.5,"))
    assert any(path == "model.structures[0].revolute.L_j" for path, _ in probs)
    probs = _problems(MINIMAL.replace("s_j: 0.35", "s_j: 0.9"))
    assert any(path == "model.structures[0].revolute" and "triangle" in msg for path, msg in probs)
    probs = _problems(MINIMAL.replace("gravity: [0, 0, 0]", "gravity: [0, 0, 0]\n  colour: red"))
    assert any(path == "model.colour" for path, _ in probs)


def test_all_problems_are_reported():
    text = MINIMAL.replace("L_j: 0.5,", "L_j: -0.5,").replace("A_a: 6.0e-4", "A_a: -1").replace("structures: [{}, {}]", "structures: [{}]")
    paths = [p for p, _ in _problems(text)]
    assert "model.structures[0].revolute.L_j" in paths
    assert "model.structures[1].actuator.A_a" in paths
    assert len(paths) >= 2


def test_other_invalid_documents():
    probs = _problems(MINIMAL.replace("c_p1: 3.0e-8, ", ""))
    assert any("c_p1" in msg for _, msg in probs)
    assert _problems("[1, 2]") == [("<root>", "top level must be a mapping")]
    probs = _problems(MINIMAL.replace("structures: [{}, {}]", "structures: [{}, {K_default: -1.0}]"))
    assert probs and all(path == "gains.structures[1].K_default" for path, _ in probs)
    probs = _problems(MINIMAL.replace("structures: [{}, {}]", "structures: [{}, {K_default: [1, 1, 1, -1, 1, 1]}]"))
    assert any("positive definite" in msg for _, msg in probs)


def test_parse_error_has_line_and_column():
    with pytest.raises(ParseError) as info:
        loads_config("model:\n  structures: [\n")
    assert info.value.line is not None and info.value.column is not None


def _flatten(d, prefix=""):
    if isinstance(d, dict):
        for k, v in d.items():
            yield from _flatten(v, f"{prefix}.{k}")
    elif isinstance(d, list):
        for i, v in enumerate(d):
            yield from _flatten(v, f"{prefix}[{i}]")
    else:
        yield prefix, d


def test_write_then_load_reproduces_the_model(tmp_path):
    for cfg in (loads_config(default_config_text()), loads_config(MINIMAL)):
        path = tmp_path / "round.yaml"
        write_config(cfg, path)
        back = load_config(path)
        a, b = dict(_flatten(config_document(cfg))), dict(_flatten(config_document(back)))
        assert a.keys() == b.keys()
        for k in a:
            if isinstance(a[k], float):
                assert float(f"{a[k]:.12g}") == float(f"{b[k]:.12g}"), k
            else:
                assert a[k] == b[k], k
        assert dumps_config(back) == dumps_config(cfg)


def test_cli_verify_quick(capsys):
    assert main(["verify", "--quick"]) == 0
    out = capsys.readouterr().out
    assert "verify: passed=" in out and "failed=0" in out


def test_cli_forces_zero_gravity_massless(tmp_path, capsys):
    cfg = tmp_path / "m.yaml"
    cfg.write_text(MINIMAL)
    state = tmp_path / "s.yaml"
    state.write_text("q: [-1.2, -1.0]\ndq: [0.3, -0.2]\nddq: [1.0, 2.0]\n")
    assert main(["forces", "--config", str(cfg), str(state)]) == 0
    out = capsys.readouterr().out
    assert "f_c1_N=0 " in out.splitlines()[-1] + " "
    for line in out.splitlines()[:-1]:
        assert float(line.split("=")[1]) == 0.0


def test_cli_forces_reports_every_actuator(tmp_path, capsys):
    state = tmp_path / "s.yaml"
    state.write_text("q: [-1.2, -1.0]\n")
    assert main(["forces", str(state)]) == 0
    last = capsys.readouterr().out.splitlines()[-1]
    values = [float(f.split("=")[1]) for f in last.split()[1:]]
    assert len(values) == 2 and all(v != 0.0 for v in values)


def test_cli_simulate_and_plot_are_deterministic(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("HYDROVDC_OUTPUT_DIR", str(tmp_path))
    assert main(["simulate", "--duration", "0.05", "--out", "a.csv"]) == 0
    assert main(["simulate", "--duration", "0.05", "--out", "b.csv"]) == 0
    a, b = (tmp_path / "a.csv").read_bytes(), (tmp_path / "b.csv").read_bytes()
    assert a == b
    trace = read_trace_csv(tmp_path / "a.csv")
    assert len(trace["t_s"]) == 51 and np.all(np.diff(trace["t_s"]) > 0)
    header = a.splitlines()[0].decode()
    for col in ("t_s", "q1_des_rad", "fp1_req_N", "pa2_Pa", "u2_V", "nu1_J", "tool_err_m"):
        assert col in header.split(",")
    assert main(["plot", str(tmp_path / "a.csv")]) == 0
    script = tmp_path / "a_plots.py"
    src = script.read_text()
    compile(src, str(script), "exec")
    assert "a.csv" in src and "forces.png" in src
    assert main(["plot", str(tmp_path / "a.csv")]) == 0
    assert script.read_text() == src
    assert "simulate: rows=51" in capsys.readouterr().out


def test_cli_exit_codes(tmp_path, capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text(MINIMAL.replace("L_j: 0.5,", "L_j: -0.5,"))
    assert main(["simulate", "--config", str(bad)]) == 2
    assert "L_j" in capsys.readouterr().err
    assert main(["plot", str(tmp_path / "missing.csv")]) == 2
    unstable = tmp_path / "unstable.yaml"
    text = default_config_text().replace("k_f: 1.0e-8", "k_f: 1.0e-5").replace("lam: 5.0", "lam: 20.0")
    text = text.replace("approach_time: 0.0", "approach_time: 0.0\n    start: [1.55, -0.30]")
    unstable.write_text(text)
    assert main(["simulate", "--config", str(unstable), "--duration", "0.5", "--out", str(tmp_path / "u.csv")]) == 1
    assert "aborted step=" in capsys.readouterr().err
