import csv
import io
import json

import pytest
from click.testing import CliRunner

from ppsauction.cli import BENCH_COLUMNS, main
from ppsauction.model import load_scenario


@pytest.fixture
def runner(monkeypatch):
    monkeypatch.setenv("PPS_KEY_BITS", "512")
    return CliRunner()


def test_generate_sua(runner, tmp_path):
    out = tmp_path / "s.json"
    res = runner.invoke(main, ["generate", "--model", "sua", "--n", "50", "--area", "100", "--seed", "1", "-o", str(out)])
    assert res.exit_code == 0, res.output
    sc = load_scenario(out)
    assert len(sc.bidders) == 50 and all(b.demand == 1 for b in sc.bidders)


def test_generate_deterministic(runner, tmp_path):
    args = ["generate", "--model", "mua", "--n", "100", "--channels", "4", "--demand-max", "4", "--seed", "3"]
    a = runner.invoke(main, args + ["-o", str(tmp_path / "a.json")])
    b = runner.invoke(main, args + ["-o", str(tmp_path / "b.json")])
    assert a.exit_code == b.exit_code == 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    assert {b.demand for b in load_scenario(tmp_path / "a.json").bidders} <= {1, 2, 3, 4}


@pytest.mark.parametrize("args", [
    ["--model", "sua", "--n", "5", "--channels", "3"],
    ["--model", "sua", "--n", "5", "--demand-max", "2"],
    ["--model", "mua", "--n", "5", "--demand-min", "3", "--demand-max", "2"],
    ["--model", "mua", "--n", "0"],
])
def test_generate_rejects_contradictions(runner, args):
    assert runner.invoke(main, ["generate", *args]).exit_code == 2


def _scenario(runner, tmp_path, model, n, area, seed, extra=()):
    path = tmp_path / f"{model}-{seed}.json"
    res = runner.invoke(main, ["generate", "--model", model, "--n", str(n), "--area", str(area),
                               "--seed", str(seed), "-o", str(path), *extra])
    assert res.exit_code == 0
    return path


def test_run_sua_ratio_bound(runner, tmp_path):
    path = _scenario(runner, tmp_path, "sua", 12, 5, 1)
    res = runner.invoke(main, ["run", str(path), "--mechanism", "sua", "--k", "4", "--encrypted"])
    assert res.exit_code == 0, res.output
    report = json.loads(res.output)
    assert report["encrypted"] and report["comm"]["total_bytes"] > 0
    assert 0.5625 <= report["social_efficiency_ratio"] <= 1


def test_run_mua_and_emua(runner, tmp_path):
    path = _scenario(runner, tmp_path, "mua", 12, 3, 2, ["--channels", "4"])
    reports = {}
    for mech in ("mua", "emua"):
        res = runner.invoke(main, ["run", str(path), "--mechanism", mech])
        assert res.exit_code == 0, res.output
        reports[mech] = json.loads(res.output)
    assert reports["mua"]["social_efficiency_ratio"] >= 1 / 32
    assert reports["emua"]["social_efficiency_ratio"] >= reports["mua"]["social_efficiency_ratio"]


def test_run_epsilon_and_csv(runner, tmp_path):
    path = _scenario(runner, tmp_path, "sua", 8, 5, 4)
    res = runner.invoke(main, ["run", str(path), "--mechanism", "sua", "--epsilon", "1.0", "--format", "csv"])
    assert res.exit_code == 0, res.output
    rows = list(csv.DictReader(io.StringIO(res.output)))
    assert rows[0]["k"] == "4" and rows[0]["mechanism"] == "PPS-SUA"
    both = runner.invoke(main, ["run", str(path), "--mechanism", "sua", "--k", "3", "--epsilon", "1"])
    assert both.exit_code == 2


def test_run_omits_ratio_above_cap(runner, tmp_path):
    path = _scenario(runner, tmp_path, "mua", 20, 4, 1)
    res = runner.invoke(main, ["run", str(path), "--mechanism", "mua"])
    assert json.loads(res.output)["social_efficiency_ratio"] is None


def test_bench_schema(runner):
    base = ["bench", "--mechanism", "sua", "--n", "6,8", "--k", "2,3", "--plaintext"]
    one = runner.invoke(main, base + ["--repetitions", "1"])
    two = runner.invoke(main, base + ["--repetitions", "2"])
    assert one.exit_code == two.exit_code == 0
    r1, r2 = list(csv.DictReader(io.StringIO(one.output))), list(csv.DictReader(io.StringIO(two.output)))
    assert list(r1[0]) == list(r2[0]) == BENCH_COLUMNS
    assert len(r1) == len(r2) == 4


def test_bench_encrypted_comm(runner):
    res = runner.invoke(main, ["bench", "--mechanism", "mua", "--n", "6,12", "--m", "2", "--repetitions", "2"])
    rows = list(csv.DictReader(io.StringIO(res.output)))
    assert float(rows[0]["total_bytes_mean"]) < float(rows[1]["total_bytes_mean"])


def test_verify_fuzz_passes(runner):
    res = runner.invoke(main, ["verify", "--fuzz", "10", "--mechanism", "sua", "--encrypted"])
    assert res.exit_code == 0, res.output
    assert "[FAIL]" not in res.output


def test_verify_scenario_file(runner, tmp_path):
    path = _scenario(runner, tmp_path, "mua", 10, 2, 5)
    res = runner.invoke(main, ["verify", str(path), "--mechanism", "emua"])
    assert res.exit_code == 0, res.output


def test_verify_injected_overflow(runner):
    res = runner.invoke(main, ["verify", "--fuzz", "2", "--mechanism", "mua", "--inject", "overflow"])
    assert res.exit_code == 1
    assert "overflow guard" in res.output


def test_verify_injected_misreport(runner):
    res = runner.invoke(main, ["verify", "--fuzz", "10", "--mechanism", "sua", "--inject", "misreport"])
    assert res.exit_code == 1
    assert "[FAIL] strategyproofness" in res.output


def test_verify_needs_exactly_one_source(runner):
    assert runner.invoke(main, ["verify", "--mechanism", "sua"]).exit_code == 2
