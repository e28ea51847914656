import csv
import json

import numpy as np
import pytest

from flexpool import cli
from flexpool.zonotope import load_zonotopes


def run(*argv):
    return cli.main([str(a) for a in argv])


@pytest.fixture
def fitted(tmp_path):
    assert run("sample", "--count", 3, "--N", 4, "--t-s", 4, "--seed", 5, "--out", tmp_path) == 0
    assert run("fit", "--scenario", tmp_path / "scenario.json", "--out", tmp_path) == 0
    return tmp_path


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_fit_single_system(tmp_path):
    assert run("sample", "--count", 1, "--N", 6, "--out", tmp_path) == 0
    assert run("fit", "--scenario", tmp_path / "scenario.json", "--out", tmp_path) == 0
    report = rows(tmp_path / "fit_report.csv")
    assert len(report) == 1
    assert set(report[0]) == {"system_id", "lambda_z", "lambda_b", "fit_seconds"}
    assert len(load_zonotopes(tmp_path / "zonotopes.json")) == 1
    meta = json.loads((tmp_path / "run_report.json").read_text())
    assert "config_hash" in meta


def test_missing_file_exits_2(tmp_path, capsys):
    assert run("fit", "--scenario", tmp_path / "nope.json", "--out", tmp_path) == 2
    assert "error" in capsys.readouterr().err


def test_unknown_profile_exits_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("bench", "--profile", "bogus", "--out", tmp_path)
    assert exc.value.code == 2


def test_bad_thread_env(fitted, monkeypatch):
    monkeypatch.setenv("FLEXPOOL_THREADS", "zero")
    assert run("fit", "--scenario", fitted / "scenario.json", "--out", fitted) == 2


def test_threads_give_same_fit(fitted, monkeypatch, tmp_path):
    first = (fitted / "zonotopes.json").read_text()
    monkeypatch.setenv("FLEXPOOL_THREADS", "2")
    out = tmp_path / "threaded"
    assert run("fit", "--scenario", fitted / "scenario.json", "--out", out) == 0
    assert (out / "zonotopes.json").read_text() == first


def test_aggregate(fitted, tmp_path):
    zs = load_zonotopes(fitted / "zonotopes.json")
    one = tmp_path / "one"
    assert run("aggregate", fitted / "zonotopes.json", "--out", one) == 0
    agg = load_zonotopes(one / "aggregate.json")
    assert len(agg) == 1
    np.testing.assert_allclose(agg[0].center, sum(z.center for z in zs))
    # two files: the second is a copy of the first
    copy = tmp_path / "copy.json"
    copy.write_text((fitted / "zonotopes.json").read_text())
    two = tmp_path / "two"
    assert run("aggregate", fitted / "zonotopes.json", copy, "--out", two) == 0
    agg2 = load_zonotopes(two / "aggregate.json")[0]
    np.testing.assert_allclose(agg2.center, 2 * agg[0].center)
    np.testing.assert_allclose(agg2.betabar, 2 * agg[0].betabar)


def _write_p_agg(path, values):
    path.write_text("step,power_kw\n" + "".join(f"{i},{float(v)}\n" for i, v in enumerate(values)))
    return path


def test_disaggregate_roundtrip(fitted):
    zs = load_zonotopes(fitted / "zonotopes.json")
    target = sum(z.center for z in zs)
    p = _write_p_agg(fitted / "p_agg.csv", target)
    assert run("disaggregate", "--scenario", fitted / "scenario.json", "--zonotopes", fitted / "zonotopes.json",
               "--p-agg", p, "--oracle", "--out", fitted) == 0
    traj = rows(fitted / "trajectories.csv")
    assert len(traj) == 3
    P = np.array([[float(r[f"p{k}"]) for k in range(4)] for r in traj])
    np.testing.assert_allclose(P.sum(0), target, atol=1e-6)
    result = json.loads((fitted / "result.json").read_text())
    assert result["gap"] >= -1e-7


def test_infeasible_target_exits_3(fitted, capsys):
    p = _write_p_agg(fitted / "p_agg.csv", [1e4, 0, 0, 0])
    code = run("disaggregate", "--scenario", fitted / "scenario.json", "--zonotopes", fitted / "zonotopes.json",
               "--p-agg", p, "--out", fitted)
    assert code == 3
    assert "facet index" in capsys.readouterr().err


def test_malformed_p_agg_exits_2(fitted):
    p = fitted / "p_agg.csv"
    p.write_text("step,power_kw\n0,1\n1,x\n")
    assert run("disaggregate", "--scenario", fitted / "scenario.json", "--zonotopes", fitted / "zonotopes.json",
               "--p-agg", p, "--out", fitted) == 2


def test_bidcurve(fitted):
    assert run("bidcurve", "--scenario", fitted / "scenario.json", "--zonotopes", fitted / "zonotopes.json",
               "--eta-grid", "0,0.5,1", "--oracle", "--out", fitted) == 0
    curve = rows(fitted / "bidcurve.csv")
    assert [float(r["eta"]) for r in curve] == [0.0, 0.5, 1.0]
    assert float(curve[0]["offer_cost_eur"]) == 0.0
    assert float(curve[0]["r_kw"]) == 0.0
    assert (fitted / "comparison.csv").exists()
    assert run("bidcurve", "--scenario", fitted / "scenario.json", "--eta-grid", "0,2",
               "--out", fitted) == 2


def test_bench_quick(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text('{"infconv": {"seeds": 2}, "minkowski": {"pairs": 5}}')
    assert run("bench", "--profile", "quick", "--out", tmp_path, "--config", cfg) == 0
    report = json.loads((tmp_path / "run_report.json").read_text())
    assert report["profile"] == "quick" and report["passed"]
    assert (tmp_path / "summary.txt").exists()
