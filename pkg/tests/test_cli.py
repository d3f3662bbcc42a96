"""CLI subcommands, exit codes and the JSONL trace format."""

import json

import numpy as np
import pytest

from rallysim.cli import main
from rallysim.trace import SCHEMA, dumps, trace_lines


# ---------------------------------------------------------------------------
# Trace serialization
# ---------------------------------------------------------------------------

def test_dumps_floats_roundtrip_exactly():
    values = [0.1, 1.0 / 3.0, 1e-300, -2.5e17, np.pi, 5.0,
              np.float64(0.30000000000000004)]
    for x in values:
        assert json.loads(dumps(x)) == x
    assert dumps(5.0) == "5.0"           # stays a float in JSON
    assert dumps(float("nan")) == "NaN"


def test_dumps_handles_numpy_and_enum_types():
    from rallysim.rules import Outcome
    blob = dumps({"a": np.array([1.5, 2.5]), "b": np.bool_(True),
                  "c": np.int64(3), "d": Outcome.SUCCESS, "e": None,
                  "f": 'quo"te'})
    parsed = json.loads(blob)
    assert parsed == {"a": [1.5, 2.5], "b": True, "c": 3,
                      "d": "Success", "e": None, "f": 'quo"te'}
    with pytest.raises(TypeError):
        dumps(object())


def test_trace_lines_have_schema_header_and_terminal():
    from rallysim.controllers import NullController
    from rallysim.core import derive_stream
    from rallysim.harness import run_trial
    from rallysim.phases import phase_spec, sample_trial
    trial = sample_trial(phase_spec("tt", "1"), derive_stream(0, 0))
    trace = run_trial(trial, NullController())
    lines = trace_lines(trace)
    header = json.loads(lines[0])
    assert header["schema"] == SCHEMA
    assert header["config"]["track"] == "tt"
    assert all(json.loads(ln) for ln in lines)     # every line parses
    assert json.loads(lines[-1])["terminal"] is True


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def test_simulate_writes_traces(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    code = main(["simulate", "--seed", "3", "--trials", "2",
                 "--controller", "null", "--out", str(out)])
    assert code == 0
    lines = out.read_text().strip().splitlines()
    assert sum(1 for ln in lines if "schema" in ln) == 2
    stdout = capsys.readouterr().out.strip().splitlines()
    assert len(stdout) == 2
    assert json.loads(stdout[0])["trial"] == 0


def test_plan_reports_a_full_hit_plan(tmp_path, capsys):
    out = tmp_path / "plan.json"
    assert main(["plan", "--seed", "1", "--out", str(out)]) == 0
    plan = json.loads(out.read_text())
    assert set(plan) >= {"p_hit", "t_hit", "q_hit", "v_hit",
                         "predicted_landing"}
    assert plan["t_hit"] > 0.0
    assert plan["predicted_landing"][0] < 0.0


def test_evaluate_reports_metrics(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = main(["evaluate", "--seed", "0", "--trials", "3",
                 "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["n_trials"] == 3
    assert report["success_rate"] == 1.0


def test_evaluate_soccer_track(capsys):
    code = main(["evaluate", "--track", "soccer", "--seed", "0",
                 "--trials", "2"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert report["outcome_counts"].get("Goal", 0) == 2


def test_rank_command(tmp_path, capsys):
    entries = tmp_path / "entries.json"
    entries.write_text(json.dumps([[0.95, 0.5], [0.94, 0.1], [0.2, 0.0]]))
    assert main(["rank", str(entries)]) == 0
    assert json.loads(capsys.readouterr().out)["order"] == [1, 0, 2]


def test_route_command(tmp_path, capsys):
    from rallysim.router import fit, save_model
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(-2, 0.3, (10, 2)), rng.normal(2, 0.3, (10, 2))])
    y = np.array([-1.0] * 10 + [1.0] * 10)
    m_a, m_b = tmp_path / "a.json", tmp_path / "b.json"
    save_model(fit(X, y), m_a)
    save_model(fit(X, -y), m_b)
    serves = tmp_path / "serves.json"
    serves.write_text(json.dumps([[2.0, 0.0], [-2.0, 0.0]]))
    assert main(["route", str(serves), "--model", str(m_a),
                 "--model", str(m_b)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert json.loads(lines[0])["policy"] == 0
    assert json.loads(lines[1])["policy"] == 1


def test_sample_synergy_command(capsys):
    assert main(["sample-synergy", "--seed", "4", "--count", "3"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
    rec = json.loads(lines[0])
    assert len(rec["action"]) == 26
    assert all(0.0 <= a <= 1.0 for a in rec["action"])
    # identical seeds reproduce identical draws
    main(["sample-synergy", "--seed", "4", "--count", "3"])
    assert capsys.readouterr().out.strip().splitlines()[0] == lines[0]


def test_calibrate_command(tmp_path, capsys):
    from rallysim.ballistics import MediumModel, flight_pos, flight_vel
    from rallysim.core import BallState
    m = MediumModel(k=0.09)
    s0 = BallState([0.0, 0.0, 1.5], [4.0, 0.0, 1.0])
    records = []
    for i, t in enumerate(np.linspace(0.0, 0.5, 12)):
        rec = {"t": float(t), "pos": flight_pos(s0, t, m).tolist()}
        if i == 0:
            rec["vel"] = flight_vel(s0, t, m).tolist()
        records.append(rec)
    samples = tmp_path / "samples.json"
    samples.write_text(json.dumps(records))
    assert main(["calibrate", str(samples)]) == 0
    fit = json.loads(capsys.readouterr().out)
    assert fit["k"] == pytest.approx(0.09, abs=1e-5)
    assert fit["residual"] < 1e-6


def test_calibrate_requires_an_initial_velocity(tmp_path, capsys):
    samples = tmp_path / "bad.json"
    samples.write_text(json.dumps([{"t": 0.0, "pos": [0, 0, 1]}]))
    assert main(["calibrate", str(samples)]) == 2


def test_exit_codes(tmp_path, capsys):
    # missing config file -> configuration error
    assert main(["evaluate", "--config", str(tmp_path / "nope.yaml")]) == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense:\n  x: 1\n")
    assert main(["evaluate", "--config", str(bad)]) == 2
    # a controller fault surfaces as exit code 3 via the Faulted outcome
    import rallysim.cli as cli
    from rallysim.controllers import Controller

    class Boom(Controller):
        def command(self, obs):
            raise RuntimeError("boom")

    orig = cli._make_controller
    cli._make_controller = lambda name, track: Boom()
    try:
        assert main(["evaluate", "--trials", "1"]) == 3
    finally:
        cli._make_controller = orig
