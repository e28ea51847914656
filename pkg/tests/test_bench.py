import numpy as np
import pytest

from flexpool import bench


def test_config_hash_is_stable():
    a = bench.config_hash({"b": 1, "a": [1, 2]})
    assert a == bench.config_hash({"a": [1, 2], "b": 1})
    assert a != bench.config_hash({"a": [1, 2], "b": 2})


def test_profiles_cover_suites():
    assert set(bench.PROFILES["all"]) == set(bench.SUITES)
    assert set(bench.DEFAULTS) == set(bench.SUITES)
    with pytest.raises(KeyError):
        bench.run_profile("nope")


def test_quick_profile_report():
    rep = bench.run_profile("quick", seed=3, overrides={"infconv": {"seeds": 1, "points": 10},
                                                       "minkowski": {"pairs": 3}})
    d = rep.to_dict()
    assert d["profile"] == "quick" and d["passed"]
    assert d["config"]["infconv"]["seeds"] == 1 and d["config"]["minkowski"]["seed"] == 3
    assert d["config_hash"] == bench.config_hash(d["config"])
    assert set(d["metrics"]) == {"minkowski", "facets", "infconv"}
    assert "facets" in rep.summary()


def test_small_suites_are_deterministic():
    cfg = {"sizes": [5], "seeds": 2, "pool": 6, "N": 6, "highs_from": 10**9}
    a, b = bench.SUITES["gap"](cfg), bench.SUITES["gap"](cfg)
    assert [r[:5] for r in a.rows] == [r[:5] for r in b.rows]
    assert a.metrics["invariant_violations"] == 0


def test_cost_models():
    rng = np.random.default_rng(0)
    zs = bench.fitted_pool(3, 4, 2.0, 0)
    for model in ("beta-normal", "beta-uniform", "price-uniform"):
        costs, ac = bench.random_costs(model, rng, zs, 2.0)
        assert len(costs) == 3 and ac.n_systems == 3
    with pytest.raises(ValueError):
        bench.random_costs("bogus", rng, zs, 2.0)
