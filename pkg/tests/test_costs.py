import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexpool.costs import (PwlComponent, SystemCost, build_system_cost, cost_from_dict, cost_to_dict,
                            eval_aggregate, eval_with_subgradient, linear_flex_cost, merge_aggregate_cost,
                            merge_linear_costs, subgradient_at, zero_flex_cost)
from flexpool.errors import BetaOutOfRange, DimensionMismatch, NonConvexInput
from flexpool.oracles import infimal_convolution_lp
from flexpool.zonotope import Zonotope

# two one-generator systems: slopes (-2, 0) and (-1, 1) on unit-length segments
SYS1 = SystemCost((PwlComponent([1.0, 1.0], [-2.0, 0.0], 0.0),), 0.0)
SYS2 = SystemCost((PwlComponent([1.0, 1.0], [-1.0, 1.0], 0.0),), 0.0)


def random_cost(r, g, max_segments=4):
    comps = []
    for _ in range(g):
        m = int(r.integers(1, max_segments + 1))
        comps.append(PwlComponent(r.uniform(0.1, 1.0, m), np.sort(r.normal(size=m)), float(r.normal())))
    return SystemCost(tuple(comps), float(r.normal()))


def test_component_basics():
    c = PwlComponent([1.0, 0.0, 2.0], [-1.0, 5.0, 2.0], 3.0)
    np.testing.assert_array_equal(c.lengths, [1.0, 2.0])      # zero-length dropped
    assert c.betabar == 1.5
    assert c(-1.5) == 3.0
    assert c(-0.5) == 2.0
    assert c(1.5) == pytest.approx(6.0)
    with pytest.raises(NonConvexInput):
        PwlComponent([1.0, 1.0], [1.0, 0.0], 0.0)
    assert PwlComponent.from_dict(c.to_dict()) == c
    assert c != PwlComponent([1.0, 2.0], [-1.0, 2.0], 0.0)


def test_restrict(rng):
    c = PwlComponent([1.0, 1.0, 2.0], [-1.0, 0.5, 2.0], 1.0)
    r = c.restrict(0.7)
    assert r.betabar == pytest.approx(0.7)
    for x in np.linspace(-0.7, 0.7, 29):
        assert r(x) == pytest.approx(c(x))
    with pytest.raises(BetaOutOfRange):
        c.restrict(3.0)


def test_zero_prices_keep_flex_cost(rng):
    Z = Zonotope("pe", rng.normal(size=3), rng.uniform(0.5, 1.0, 5))
    flex = linear_flex_cost(rng.normal(size=5), Z.betabar)
    sc = build_system_cost(flex, np.zeros(3), Z, 2.0)
    assert sc.t_fix == 0.0
    assert list(sc.components) == flex


def test_flat_price_slopes():
    n, ts, v = 4, 0.5, 0.2
    Z = Zonotope("pe", np.ones(n), np.ones(2 * n - 1))
    sc = build_system_cost(zero_flex_cost(Z.betabar), np.full(n, v), Z, ts)
    slopes = np.array([c.slopes[0] for c in sc.components])
    np.testing.assert_allclose(slopes[:n], -ts * v)
    np.testing.assert_allclose(slopes[n:], 0.0, atol=1e-15)
    assert sc.t_fix == pytest.approx(-ts * v * n)


def test_system_cost_matches_direct_formula(rng):
    n, ts = 4, 1.5
    Z = Zonotope("pe", rng.normal(size=n), rng.uniform(0.2, 1.5, 2 * n - 1))
    flex = [PwlComponent(np.full(3, 2 * b / 3), np.sort(rng.normal(size=3)), float(rng.normal()))
            for b in Z.betabar]
    v = rng.uniform(0, 1, n)
    sc = build_system_cost(flex, v, Z, ts)
    for _ in range(1000):
        beta = rng.uniform(-1, 1, 2 * n - 1) * Z.betabar
        direct = sum(f(b) for f, b in zip(flex, beta)) - ts * v @ (Z.center + Z.G @ beta)
        assert sc(beta) == pytest.approx(direct, abs=1e-10)


def test_build_cost_validation(rng):
    Z = Zonotope("pe", np.zeros(2), np.ones(3))
    with pytest.raises(DimensionMismatch):
        build_system_cost(zero_flex_cost(np.ones(2)), np.zeros(2), Z, 1.0)
    with pytest.raises(DimensionMismatch):
        build_system_cost(zero_flex_cost(2 * np.ones(3)), np.zeros(2), Z, 1.0)
    with pytest.raises(DimensionMismatch):
        build_system_cost(zero_flex_cost(np.ones(3)), np.zeros(3), Z, 1.0)


def test_merge_example(backend):
    ac = merge_aggregate_cost([SYS1, SYS2])
    l, q, s = ac.segments(0)
    np.testing.assert_array_equal(l, [1, 1, 1, 1])
    np.testing.assert_array_equal(q, [-2, -1, 0, 1])
    np.testing.assert_array_equal(s, [0, 1, 0, 1])
    assert ac.betabar[0] == 2.0


def test_merge_single_system_unchanged():
    ac = merge_aggregate_cost([SYS1])
    l, q, s = ac.segments(0)
    np.testing.assert_array_equal(l, SYS1.components[0].lengths)
    np.testing.assert_array_equal(q, SYS1.components[0].slopes)


def test_merge_example_grid_oracle(backend):
    ac = merge_aggregate_cost([SYS1, SYS2])
    grid = np.round(np.arange(-1.0, 1.0001, 0.01), 10)
    for beta in np.round(np.arange(-2.0, 2.0001, 0.01), 10):
        b1 = grid[np.abs(beta - grid) <= 1.0 + 1e-12]
        best = min(SYS1([x]) + SYS2([beta - x]) for x in b1)
        assert eval_aggregate(ac, [beta]) == pytest.approx(best, abs=1e-9)


def test_eval_endpoints(backend, rng):
    costs = [random_cost(rng, 3) for _ in range(4)]
    ac = merge_aggregate_cost(costs)
    assert eval_aggregate(ac, -ac.betabar) == pytest.approx(ac.t_fix + ac.anchors.sum())
    full = sum(c(c.betabar) for c in costs)
    assert eval_aggregate(ac, ac.betabar) == pytest.approx(full)


def test_subgradient_examples(backend):
    ac = merge_aggregate_cost([SYS1, SYS2])
    assert subgradient_at(ac, [-1.5])[0] == -2.0
    assert subgradient_at(ac, [2.0])[0] == 1.0
    # right slopes at the interior breakpoints (cumulative positions 1, 2, 3)
    for beta, slope in [(-1.0, -1.0), (0.0, 0.0), (1.0, 1.0)]:
        assert subgradient_at(ac, [beta])[0] == slope


def test_eval_out_of_range():
    ac = merge_aggregate_cost([SYS1, SYS2])
    with pytest.raises(BetaOutOfRange):
        eval_aggregate(ac, [2.5])
    with pytest.raises(DimensionMismatch):
        eval_aggregate(ac, [0.0, 0.0])


@pytest.mark.parametrize("seed", range(10))
def test_matches_infimal_convolution_lp(backend, seed):
    r = np.random.default_rng(seed)
    costs = [random_cost(r, 5) for _ in range(5)]
    ac = merge_aggregate_cost(costs)
    for _ in range(10):
        beta = r.uniform(-1, 1, 5) * ac.betabar
        assert eval_aggregate(ac, beta) == pytest.approx(infimal_convolution_lp(costs, beta), abs=1e-6)


def test_linear_merge_equals_general(backend, rng):
    J, g = 30, 7
    q = rng.normal(size=(J, g))
    B = rng.uniform(0, 1, (J, g))
    B[rng.uniform(size=B.shape) < 0.1] = 0.0
    fast = merge_linear_costs(q, B)
    slow = merge_aggregate_cost([SystemCost(tuple(linear_flex_cost(q[j], B[j])), 0.0) for j in range(J)])
    for name in ("offsets", "lengths", "slopes", "owners", "cum_len", "cum_int"):
        np.testing.assert_allclose(getattr(fast, name), getattr(slow, name), atol=1e-12)
    np.testing.assert_allclose(fast.anchors, slow.anchors, atol=1e-12)
    for _ in range(20):
        beta = rng.uniform(-1, 1, g) * fast.betabar
        assert eval_aggregate(fast, beta) == pytest.approx(eval_aggregate(slow, beta))


def test_backends_agree(rng):
    from flexpool import kernels

    mods = kernels.available_backends()
    costs = [random_cost(rng, 6) for _ in range(8)]
    ac = merge_aggregate_cost(costs)
    for _ in range(50):
        beta = np.ascontiguousarray(rng.uniform(-1, 1, 6) * ac.betabar)
        outs = [m.aggregate_eval(ac.offsets, ac.cum_len, ac.cum_int, ac.slopes, ac.anchors, ac.betabar, beta)
                for m in mods.values()]
        for t, gr in outs[1:]:
            assert t == pytest.approx(outs[0][0], abs=1e-12)
            np.testing.assert_array_equal(gr, outs[0][1])


def test_cost_dict_roundtrip(rng):
    flex = [PwlComponent([0.5, 1.5], [-1.0, 2.0], 0.25)]
    prices = rng.uniform(size=3)
    f2, p2 = cost_from_dict(cost_to_dict(flex, prices))
    assert f2 == flex
    np.testing.assert_array_equal(p2, prices)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), J=st.integers(1, 6), g=st.integers(1, 4))
def test_aggregate_convex_and_subgradient_valid(seed, J, g):
    r = np.random.default_rng(seed)
    ac = merge_aggregate_cost([random_cost(r, g) for _ in range(J)])
    a = r.uniform(-1, 1, g) * ac.betabar
    b = r.uniform(-1, 1, g) * ac.betabar
    t = r.uniform()
    fa, fb = eval_aggregate(ac, a), eval_aggregate(ac, b)
    assert eval_aggregate(ac, t * a + (1 - t) * b) <= t * fa + (1 - t) * fb + 1e-9
    # subgradient inequality on each separable coordinate along the right direction
    ga = subgradient_at(ac, a)
    step = np.minimum(ac.betabar - a, 1e-3)
    assert eval_aggregate(ac, a + step) >= fa + ga @ step - 1e-9


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_merge_order_independent(seed):
    r = np.random.default_rng(seed)
    costs = [random_cost(r, 3) for _ in range(5)]
    a = merge_aggregate_cost(costs)
    b = merge_aggregate_cost(costs[::-1])
    beta = r.uniform(-1, 1, 3) * a.betabar
    assert eval_aggregate(a, beta) == pytest.approx(eval_aggregate(b, beta), abs=1e-10)
