import json

import pytest

from bidgames import errors
from bidgames.arena import build_graph, parse_mechanism
from bidgames.cli import derive_p, dumps, load_config, main


def run(argv, tmp_path, name="out.json"):
    out = tmp_path / name
    code = main(argv + ["--out", str(out)])
    return code, (json.loads(out.read_text()) if out.exists() else None)


def test_solve_bowtie(tmp_path):
    code, rep = run(["solve", "--graph", "bowtie", "--p", "0.5"], tmp_path)
    assert code == 0
    assert rep["value"] == pytest.approx(0.5)
    assert rep["pot"] == pytest.approx([0.0, -1.0])
    assert rep["strength"] == pytest.approx([0.25, 0.25])
    assert rep["sigma_max"] == [0, 0] and rep["sigma_min"] == [1, 1]
    assert rep["derivation"] == "given"


def test_solve_derives_p_from_mechanism(tmp_path):
    code, rep = run(["solve", "--graph", "bowtie", "--mechanism", "ap-poorman",
                     "--budget-max", "0.75", "--budget-min", "0.25"], tmp_path)
    assert code == 0
    assert rep["p"] == pytest.approx(5 / 6) and rep["value"] == pytest.approx(5 / 6)


@pytest.mark.parametrize("mech, B, C, mode, p", [
    ("fp-richman", 0.2, 0.8, "mixed", 0.5), ("fp-poorman", 0.2, 0.8, "mixed", 0.2),
    ("ap-richman", 0.2, 0.8, "pure", 0.0), ("ap-poorman", 0.75, 0.25, "pure", 2 / 3),
    ("ap-poorman", 0.25, 0.75, "mixed", 1 / 6), ("ap-poorman", 0.25, 0.75, "pure", 0.0),
    ("taxman:tau=0", 0.2, 0.8, "mixed", 0.5), ("taxman:tau=1", 0.2, 0.8, "mixed", 0.2),
])
def test_derive_p(mech, B, C, mode, p):
    assert derive_p(parse_mechanism(mech), B, C, mode)[0] == pytest.approx(p, abs=1e-12)


def test_derive_p_asymmetric_needs_p():
    with pytest.raises(errors.ValidationError):
        derive_p(parse_mechanism("asym:W=2"), 1.0, 1.0, "mixed")


def test_simulate_is_deterministic_and_writes_trace(tmp_path):
    argv = ["simulate", "--graph", "bowtie", "--mechanism", "ap-richman", "--max",
            "ap-richman-mixed", "--eps", "1", "--min", "uniform:f=0.5", "--steps", "10",
            "--trials", "2", "--seed", "5"]
    trace = tmp_path / "t.jsonl"
    code, a = run(argv + ["--trace-out", str(trace)], tmp_path, "a.json")
    assert code == 0
    _, b = run(argv, tmp_path, "b.json")
    assert a == b
    lines = trace.read_text().splitlines()
    assert len(lines) == 20
    first = json.loads(lines[0])
    assert first["trial"] == 0 and first["step"] == 0 and first["vertex"] == 0


def test_simulate_reports_min_counter_bound(tmp_path):
    code, rep = run(["simulate", "--graph", "bowtie", "--max", "fraction:f=0.5", "--min",
                     "min-counter", "--budget-max", "0.75", "--budget-min", "0.25",
                     "--steps", "2000"], tmp_path)
    assert code == 0
    assert rep["min_losses_max"] <= rep["min_loss_bound"] == 4


def test_certify_live_run_passes(tmp_path):
    code, rep = run(["certify", "--graph", "bowtie", "--mechanism", "asym:W=2", "--max",
                     "asym-pure:W=2,eps=0.5", "--min", "fraction:f=0.5", "--budget-max", "1",
                     "--budget-min", "1", "--steps", "500"], tmp_path)
    assert code == 0 and rep["passed"]
    names = {c["name"].split(":")[0] for c in rep["checks"]}
    assert {"replay", "invariant", "bound"} <= names


def test_certify_corrupted_trace_exits_4(tmp_path):
    base = ["--graph", "bowtie", "--mechanism", "ap-richman", "--max", "ap-richman-mixed:eps=1",
            "--min", "uniform:f=0.5", "--budget-max", "0.3", "--budget-min", "0.7",
            "--steps", "50"]
    trace = tmp_path / "t.jsonl"
    assert main(["simulate", *base, "--trace-out", str(trace), "--out", str(tmp_path / "s.json")]) == 0
    code, rep = run(["certify", *base, "--trace", str(trace), "--checks", "replay"], tmp_path)
    assert code == 0 and rep["passed"]
    lines = trace.read_text().splitlines()
    d = json.loads(lines[3])
    d["budget_max"] *= 0.5
    lines[3] = json.dumps(d)
    trace.write_text("\n".join(lines) + "\n")
    code, rep = run(["certify", *base, "--trace", str(trace), "--checks", "replay"], tmp_path)
    assert code == 4 and rep["passed"] is False
    assert rep["checks"][0]["first_violation"] == 3


def test_certify_magic_only(tmp_path):
    code, rep = run(["certify", "--graph", "bowtie", "--checks", "magic", "--max-len", "6"],
                    tmp_path)
    assert code == 0
    assert len(rep["checks"]) == 3 and all(c["passed"] for c in rep["checks"])


def test_parity_command(tmp_path):
    g = tmp_path / "g.json"
    g.write_text(json.dumps(build_graph([[0, 1], [0, 1]], [0, 0], [1, 0]).to_dict()))
    code, rep = run(["parity", "--graph", str(g), "--mechanism", "ap-poorman", "--ratio", "0.7"],
                    tmp_path)
    assert code == 0
    assert rep["d"] == 1 and rep["reduced_weights"] == [1.0, 0.0]
    assert rep["verdicts"]["1"]["sure_win"]


def test_parity_without_labels_is_a_validation_error(tmp_path):
    assert main(["parity", "--graph", "bowtie", "--mechanism", "ap-poorman"]) == 2


def test_sweep(tmp_path):
    code, rep = run(["sweep", "--graph", "bowtie", "--p-grid", "0,0.25,1"], tmp_path)
    assert code == 0
    assert [c["value"] for c in rep["curve"]] == pytest.approx([0.0, 0.25, 1.0])
    code, rep = run(["sweep", "--graph", "bowtie", "--points", "5"], tmp_path)
    assert len(rep["curve"]) == 5


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": "bowtie", "p": 0.3}))
    code, rep = run(["solve", "--config", str(cfg)], tmp_path)
    assert code == 0 and rep["value"] == pytest.approx(0.3)
    code, rep = run(["solve", "--config", str(cfg), "--p", "0.7"], tmp_path)
    assert rep["value"] == pytest.approx(0.7)


def test_unknown_config_key(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"graph": "bowtie", "colour": 3}))
    with pytest.raises(errors.ValidationError):
        load_config(str(cfg), {})
    assert main(["solve", "--config", str(cfg)]) == 2


@pytest.mark.parametrize("argv, code", [
    (["solve", "--nope"], 1),
    (["frobnicate"], 1),
    (["solve", "--config", "/nonexistent/c.json"], 1),
    (["solve"], 1),
    (["simulate", "--graph", "bowtie"], 1),
    (["solve", "--graph", "bowtie", "--p", "1.5"], 2),
    (["solve", "--graph", "bowtie", "--steps", "0"], 2),
    (["simulate", "--graph", "bowtie", "--max", "nope", "--min", "zero"], 2),
    (["certify", "--graph", "bowtie", "--checks", "replay,bogus"], 2),
])
def test_exit_codes(argv, code, capsys):
    assert main(argv) == code
    assert capsys.readouterr().err.startswith("error:")


def test_dumps_handles_non_finite_and_numpy():
    import numpy as np
    text = dumps({"a": np.float64("inf"), "b": np.arange(2), 3: np.bool_(True)})
    assert json.loads(text) == {"a": "inf", "b": [0, 1], "3": True}


def test_stdout_when_no_out(capsys):
    assert main(["solve", "--graph", "bowtie", "--p", "0.5"]) == 0
    assert json.loads(capsys.readouterr().out)["value"] == pytest.approx(0.5)
