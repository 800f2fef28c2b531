import json

import pytest

from infersim.cli import EXIT_CONFIG, EXIT_SIMULATION, main


@pytest.fixture
def out(tmp_path, monkeypatch):
    monkeypatch.setenv("INFERSIM_OUT", str(tmp_path / "out"))
    return tmp_path / "out"


def scenario_file(tmp_path, **extra):
    data = {"name": "cli-demo", "model": "ds-llama-8b", "parallelism": "2,1,1",
            "scheduler": {"max_num_seqs": 8},
            "workload": {"isl_hist": [[10, 40, 1]], "osl_hist": [[20, 60, 1]], "num_requests": 10},
            "telemetry_sample_interval": 5}
    data.update(extra)
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(data))
    return path


def error_json(capsys):
    return json.loads(capsys.readouterr().err.strip())


def test_simulate_writes_bundle(tmp_path, out, capsys):
    assert main(["simulate", str(scenario_file(tmp_path))]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["summary"]["finished"] == 10
    assert (out / "cli-demo" / "summary.json").exists()
    assert (out / "cli-demo" / "plot_throughput_timeline.json").exists()


def test_simulate_check_mode(tmp_path, out, capsys):
    assert main(["simulate", str(scenario_file(tmp_path)), "--no-fast-forward", "--check"]) == 0


def test_sweep_parallelism_values(tmp_path, out, capsys):
    code = main(["sweep", str(scenario_file(tmp_path)), "--axis", "parallelism", "--values", "2,1,1;1,2,1"])
    assert code == 0
    payload = json.loads(capsys.readouterr().out)
    assert [p["value"] for p in payload["points"]] == ["2,1,1", "1,2,1"]


def test_sweep_bad_axis(tmp_path, out, capsys):
    assert main(["sweep", str(scenario_file(tmp_path)), "--axis", "colour", "--values", "1"]) == EXIT_CONFIG
    err = error_json(capsys)
    assert err["error"] == "usage" and "max_num_seqs" in err["allowed"]


def test_sweep_non_integer(tmp_path, out, capsys):
    assert main(["sweep", str(scenario_file(tmp_path)), "--axis", "dp", "--values", "a"]) == EXIT_CONFIG


def test_plan_writes_ranking(out, capsys):
    assert main(["plan", "--model", "ds-qwen-14b", "--gpus", "8", "--requests", "3000"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["entries"][0]["config"] == "dp8-tp1-pp1"
    assert (out / "plan-ds-qwen-14b-8gpu.json").exists()


def test_plan_no_feasible(out, capsys):
    assert main(["plan", "--model", "llama-405b", "--gpus", "1", "--requests", "10"]) == EXIT_SIMULATION
    err = error_json(capsys)
    assert err["error"] == "no-feasible-config" and "dp1-tp1-pp1" in err["reasons"]


def test_plan_unknown_model(out, capsys):
    assert main(["plan", "--model", "gpt-9", "--gpus", "8"]) == EXIT_CONFIG
    assert "gpt-9" in error_json(capsys)["message"]


def test_workload_gen(tmp_path, capsys):
    dest = tmp_path / "w" / "reqs.csv"
    assert main(["workload", "gen", "natural-reasoning", "-o", str(dest), "--requests", "5", "--seed", "3"]) == 0
    assert len(dest.read_text().splitlines()) == 6


def test_validate(tmp_path, capsys):
    assert main(["validate", str(scenario_file(tmp_path))]) == 0
    assert json.loads(capsys.readouterr().out)["placement"]["feasible"]
    bad = scenario_file(tmp_path, model="llama-405b", parallelism="1,1,1")
    assert main(["validate", str(bad)]) == EXIT_SIMULATION
    assert error_json(capsys)["error"] == "infeasible"


def test_simulate_infeasible_and_missing(tmp_path, out, capsys):
    bad = scenario_file(tmp_path, model="llama-405b", parallelism="1,1,1")
    assert main(["simulate", str(bad)]) == EXIT_SIMULATION
    assert error_json(capsys)["error"] == "simulation"
    assert main(["simulate", str(tmp_path / "missing.json")]) != 0
    assert "missing.json" in error_json(capsys)["message"]


def test_broken_scenario_json(tmp_path, out, capsys):
    path = tmp_path / "broken.json"
    path.write_text("{\n  \"model\": ,\n}")
    assert main(["simulate", str(path)]) == EXIT_CONFIG
    assert "broken.json:2" in error_json(capsys)["message"]


def test_kv_projection_cmd(capsys):
    assert main(["kv-projection", "--model", "ds-llama-8b", "--max-tokens", "20000000", "--points", "3"]) == 0
    pts = json.loads(capsys.readouterr().out)["points"]
    assert pts == [{"tokens": 0, "bytes": 0}, {"tokens": 10_000_000, "bytes": 1_310_720_000_000},
                   {"tokens": 20_000_000, "bytes": 2_621_440_000_000}]


def test_usage_error_is_json(capsys):
    assert main(["simulate"]) == EXIT_CONFIG
    assert error_json(capsys)["error"] == "usage"
