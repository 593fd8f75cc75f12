import json
from pathlib import Path

import pytest

import scenarios as S
from dhtlearn.cli import main
from dhtlearn.config import ParseError, dump_experiment, experiment_from_dict, load_experiment, parse_seed_range
from dhtlearn.engine import run

PATH3 = {
    "schema": "dhtlearn-experiment/1",
    "graph": {"generator": "path", "n": 3},
    "hypotheses": {"labels": ["h0", "h1"], "true": "h0"},
    "agents": {"likelihoods": [[[0.8, 0.2], [0.2, 0.8]], [[0.5, 0.5], [0.5, 0.5]], [[0.5, 0.5], [0.5, 0.5]]]},
    "run": {"rule": "min_rule", "horizon": 2000, "seed": 7},
}


def write(tmp_path, doc, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc, indent=2))
    return path


def with_(doc, section, **changes):
    out = json.loads(json.dumps(doc))
    out[section].update(changes)
    return out


def test_parse_seed_range():
    assert parse_seed_range("1..4") == [1, 2, 3, 4]
    assert parse_seed_range("3, 1") == [3, 1]
    for bad in ("4..1", "x", "", "-1"):
        with pytest.raises(ParseError):
            parse_seed_range(bad)


def test_experiment_round_trips_through_to_dict(tmp_path):
    cfg = S.eight_agent("mirror", horizon=30, seed=4)
    path = tmp_path / "e.json"
    dump_experiment(cfg, path)
    loaded = load_experiment(path).config
    assert loaded.fingerprint() == cfg.fingerprint()


def test_config_errors_name_the_field(tmp_path):
    with pytest.raises(ParseError, match="run.horizon"):
        experiment_from_dict(with_(PATH3, "run", horizon=0))
    with pytest.raises(ParseError, match="Additional properties"):
        experiment_from_dict(with_(PATH3, "run", speed=3))
    with pytest.raises(ParseError, match="hypotheses.true"):
        experiment_from_dict(with_(PATH3, "hypotheses", true="h9"))
    with pytest.raises(ParseError, match="strategy"):
        experiment_from_dict({**PATH3, "run": {"rule": "lfrhe", "horizon": 5},
                              "adversary": {"agents": [2], "f": 1, "strategy": {"id": "nope"}}})
    bad = tmp_path / "bad.json"
    bad.write_text('{\n  "graph": {,\n}')
    with pytest.raises(ParseError, match=r"bad.json:2:\d+"):
        load_experiment(bad)


def test_graph_sources(tmp_path):
    (tmp_path / "g.txt").write_text("n=3\n0 1\n1 2\n")
    doc = with_(PATH3, "graph", file="g.txt")
    del doc["graph"]["generator"], doc["graph"]["n"]
    assert load_experiment(write(tmp_path, doc)).config.graph.edges == {(0, 1), (1, 2)}
    doc = with_(PATH3, "graph", generator="random", p=0.5, seed=3)
    assert experiment_from_dict(doc).config.graph.node_count == 3
    doc = {**PATH3, "graph": {"n": 3, "edges": [[2, 1], [1, 0]]}}
    assert experiment_from_dict(doc).config.graph.edges == {(2, 1), (1, 0)}


def test_check_passing_config(tmp_path, capsys):
    assert main(["check", str(write(tmp_path, PATH3))]) == 0
    out = capsys.readouterr().out
    assert "[PASS] reachability (h0, h1)" in out and "overall: PASS" in out and "diameter: 2" in out


def test_check_reports_unreachable_witness(tmp_path, capsys):
    doc = {**PATH3, "graph": {"n": 3, "edges": [[1, 2]]}}
    assert main(["check", str(write(tmp_path, doc))]) == 1
    out = capsys.readouterr().out
    assert "[FAIL] reachability (h0, h1): agents unreachable from the source set witness=[1, 2]" in out


def test_check_malformed_file(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    assert main(["check", str(path)]) == 2
    assert "bad.json:1:2" in capsys.readouterr().err
    assert main(["check", str(tmp_path / "absent.json")]) == 2


def test_source_sets_table(tmp_path, capsys):
    assert main(["source-sets", str(write(tmp_path, PATH3))]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].split() == ["pair", "source", "set", "status"]
    assert lines[1].split() == ["(h0,", "h1)", "{0}", "ok"]
    flat = with_(PATH3, "agents", likelihoods=[[[0.5, 0.5], [0.5, 0.5]]] * 3)
    assert main(["source-sets", str(write(tmp_path, flat))]) == 1
    assert "EMPTY" in capsys.readouterr().out
    three = {**PATH3, "hypotheses": {"labels": ["a", "b", "c"]},
             "agents": {"likelihoods": [[[0.5, 0.5], [0.2, 0.8], [0.7, 0.3]]] * 3}}
    assert main(["source-sets", str(write(tmp_path, three))]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 4


def test_simulate_is_byte_stable(tmp_path, capsys):
    cfg = write(tmp_path, PATH3)
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["simulate", str(cfg), "-o", str(a), "-T", "300"]) == 0
    assert main(["simulate", str(cfg), "-o", str(b), "-T", "300"]) == 0
    assert a.read_bytes() == b.read_bytes()
    out = capsys.readouterr().out
    assert f"seed 7: wrote {a}" in out


def test_simulate_seed_sweep(tmp_path):
    cfg = write(tmp_path, PATH3)
    template = str(tmp_path / "run_{seed}.csv")
    assert main(["simulate", str(cfg), "--seeds", "1..8", "-o", template, "--format", "csv", "-T", "50"]) == 0
    assert sorted(p.name for p in tmp_path.glob("run_*.csv")) == [f"run_{s}.csv" for s in range(1, 9)]
    assert main(["simulate", str(cfg), "--seeds", "2,3", "-o", str(tmp_path / "t.jsonl"), "-T", "20",
                 "-j", "2"]) == 0
    assert (tmp_path / "t_seed2.jsonl").exists() and (tmp_path / "t_seed3.jsonl").exists()


def test_simulate_matches_library_run(tmp_path):
    cfg_path = write(tmp_path, PATH3)
    out = tmp_path / "t.jsonl"
    main(["simulate", str(cfg_path), "-o", str(out), "--seed", "11", "-T", "40", "--thin", "3"])
    header = json.loads(out.read_text().splitlines()[0])
    expected = load_experiment(cfg_path).config.replace(seed=11, horizon=40, thin=3)
    assert header["fingerprint"] == run(expected).fingerprint


@pytest.mark.parametrize("argv", [
    ["-T", "0"], ["--seed", "-1"], ["--seeds", "5..1"], ["--format", "xml"], ["--thin", "x"],
    ["--seed", "1", "--seeds", "1..2"],
])
def test_simulate_invalid_overrides(tmp_path, argv):
    assert main(["simulate", str(write(tmp_path, PATH3)), "-o", str(tmp_path / "t.jsonl"), *argv]) == 2


def test_simulate_warns_on_failed_preconditions(tmp_path, capsys):
    doc = {**PATH3, "graph": {"n": 3, "edges": [[1, 2]]}}
    assert main(["simulate", str(write(tmp_path, doc)), "-o", str(tmp_path / "t.jsonl"), "-T", "10"]) == 0
    assert "preconditions fail (reachability)" in capsys.readouterr().err


def test_analyze_converged(tmp_path, capsys):
    trace = tmp_path / "t.jsonl"
    main(["simulate", str(write(tmp_path, PATH3)), "-o", str(trace)])
    capsys.readouterr()
    assert main(["analyze", str(trace)]) == 0
    out = capsys.readouterr().out
    assert "network convergence time: " in out and "network convergence time: none" not in out
    assert "reference -0.831777" in out
    assert main(["analyze", str(trace)]) == 0
    assert capsys.readouterr().out == out


def test_analyze_negative_control(tmp_path, capsys):
    doc = {**PATH3, "graph": {"n": 3, "edges": [[1, 2]]}}
    trace = tmp_path / "t.csv"
    main(["simulate", str(write(tmp_path, doc)), "-o", str(trace), "--format", "csv", "-T", "500"])
    capsys.readouterr()
    assert main(["analyze", str(trace), "--truth", "h0", "--window", "100:500"]) == 1
    out = capsys.readouterr().out
    assert "agent 1: none" in out and "agent 2: none" in out and "network convergence time: none" in out


def test_analyze_usage_errors(tmp_path):
    trace = tmp_path / "t.jsonl"
    main(["simulate", str(write(tmp_path, PATH3)), "-o", str(trace), "-T", "100"])
    assert main(["analyze", str(trace), "--window", "0:500"]) == 2
    assert main(["analyze", str(trace), "--window", "zz"]) == 2
    assert main(["analyze", str(trace), "--epsilon", "2"]) == 2
    assert main(["analyze", str(tmp_path / "missing.jsonl")]) == 2
    csv_trace = tmp_path / "t.csv"
    main(["simulate", str(write(tmp_path, PATH3)), "-o", str(csv_trace), "--format", "csv", "-T", "10"])
    assert main(["analyze", str(csv_trace)]) == 2


def test_no_command_is_usage_error():
    assert main([]) == 2


EXPERIMENTS = Path(__file__).resolve().parent.parent / "experiments"


@pytest.mark.parametrize("name,code", [
    ("path3_min_rule.json", 0),
    ("circulant8_byzantine.json", 0),
    ("circulant8_cut_negative_control.json", 1),
])
def test_shipped_experiments_check(name, code, capsys):
    assert main(["check", str(EXPERIMENTS / name)]) == code
    assert load_experiment(EXPERIMENTS / name).config.n in (3, 8)
