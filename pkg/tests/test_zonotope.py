import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexpool.errors import BetaOutOfRange, DimensionMismatch, FamilyMismatch, NegativeBeta
from flexpool.oracles import facet_count, lp_membership, zonotope_corners
from flexpool.polytope import HPolytope, PeParams, build_pe_polytope
from flexpool.zonotope import (Zonotope, contains_point, contains_points, facet_normals, is_inside_polytope,
                               load_zonotopes, minkowski_sum, pe_generators, realize, save_zonotopes,
                               update_aggregate, violated_facet, window_index)

S = math.sqrt(0.5)


def random_z(r, n, zero_prob=0.0):
    bb = r.uniform(0.1, 2.0, 2 * n - 1)
    bb[r.uniform(size=bb.size) < zero_prob] = 0.0
    return Zonotope("pe", r.normal(size=n), bb)


def test_generators():
    np.testing.assert_array_equal(pe_generators(1), [[1.0]])
    np.testing.assert_allclose(pe_generators(2), [[1, 0, -S], [0, 1, S]])
    G = pe_generators(3)
    assert G.shape == (3, 5)
    np.testing.assert_allclose(G[:, 4], [0, -S, S])
    np.testing.assert_allclose(np.linalg.norm(pe_generators(6), axis=0), 1.0)
    assert not G.flags.writeable


def test_facet_normals():
    np.testing.assert_array_equal(facet_normals(1), [[1.0]])
    np.testing.assert_allclose(facet_normals(2), [[1, S, 0], [0, S, 1]])
    assert facet_normals(4).shape == (4, 10)
    for n in range(1, 7):
        assert facet_normals(n).shape[1] == n * (n + 1) // 2
    assert window_index(3).tolist() == [[0, 0], [0, 1], [0, 2], [1, 1], [1, 2], [2, 2]]


def test_membership_examples():
    Z = Zonotope("pe", [0.0, 0.0], [1.0, 1.0, math.sqrt(2)])
    assert contains_point(Z, None, [0.0, 0.0])
    assert contains_point(Z, None, [2.0, -2.0])          # a vertex
    assert not contains_point(Z, None, [2.0, 2.0])       # violates the (1,1)/sqrt2 direction
    assert violated_facet(Z, [2.0, 2.0]) == 1
    assert violated_facet(Z, [0.5, 0.5]) is None
    with pytest.raises(DimensionMismatch):
        contains_point(Z, None, [1.0])


@pytest.mark.parametrize("n", [2, 3, 4])
def test_membership_matches_lp(n):
    r = np.random.default_rng(n)
    for _ in range(4):
        Z = random_z(r, n, zero_prob=0.2)
        pts = Z.center + r.uniform(-1, 1, (150, n)) * Z.widths().max() / 2
        for p in pts:
            assert contains_point(Z, None, p) == lp_membership(Z, p)


def test_batched_membership(rng):
    zs = [random_z(rng, 4) for _ in range(200)]
    pts = np.array([z.center + rng.normal(size=4) for z in zs])
    np.testing.assert_array_equal(contains_points(zs, pts), [contains_point(z, None, p) for z, p in zip(zs, pts)])


def test_degenerate_point_zonotope():
    Z = Zonotope("pe", [1.0, 2.0], np.zeros(3))
    assert contains_point(Z, None, [1.0, 2.0])
    assert not contains_point(Z, None, [1.0, 2.001])


def test_inside_polytope():
    P = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), np.array([1.0, 2, 1, 2]), 2)
    assert is_inside_polytope(Zonotope("pe", [0, 0], [1, 2, 0]), P)       # equality rows
    assert not is_inside_polytope(Zonotope("pe", [0, 0], [1, 2, 0.01]), P)
    assert is_inside_polytope(Zonotope("pe", [0, 0], [0, 0, 0]), P)


def test_fitted_vertices_inside_polytope(rng):
    from flexpool.zonofit import fit_zonotope
    from flexpool.polytope import contains

    P = build_pe_polytope(PeParams(4, 2.0, -3.0, 3.0, 0.0, 30.0, 12.0))
    Z = fit_zonotope(P)
    for c in zonotope_corners(Z):
        assert contains(P, c)


def test_minkowski_examples():
    a = Zonotope("pe", [1.0, 2.0], [1.0, 1.0, 0.0])
    b = Zonotope("pe", [-1.0, 0.0], [0.0, 2.0, 1.0])
    s = minkowski_sum([a, b])
    np.testing.assert_allclose(s.center, [0, 2])
    np.testing.assert_allclose(s.betabar, [1, 3, 1])
    assert minkowski_sum([a]) is a
    with pytest.raises(FamilyMismatch):
        minkowski_sum([a, Zonotope("box", [0.0, 0.0], [1.0, 1.0])])
    with pytest.raises(FamilyMismatch):
        minkowski_sum([a, Zonotope("pe", [0.0], [1.0])])


def test_update_aggregate(rng):
    zs = [random_z(rng, 3) for _ in range(3)]
    agg = minkowski_sum(zs[:1])
    back = update_aggregate(update_aggregate(agg, add=[zs[1]]), remove=[zs[1]])
    np.testing.assert_allclose(back.center, agg.center, atol=1e-15)
    np.testing.assert_allclose(back.betabar, agg.betabar, atol=1e-15)
    both = update_aggregate(agg, add=zs[1:])
    np.testing.assert_allclose(both.betabar, minkowski_sum(zs).betabar, atol=1e-12)
    with pytest.raises(NegativeBeta):
        update_aggregate(agg, remove=[zs[1], zs[2]] * 3)


def test_churn_matches_recompute(rng):
    members = [random_z(rng, 4) for _ in range(20)]
    agg = minkowski_sum(members)
    for _ in range(100):
        if rng.uniform() < 0.5 and len(members) > 1:
            out = members.pop(int(rng.integers(len(members))))
            agg = update_aggregate(agg, remove=[out])
        else:
            new = random_z(rng, 4)
            members.append(new)
            agg = update_aggregate(agg, add=[new])
    ref = minkowski_sum(members)
    np.testing.assert_allclose(agg.center, ref.center, atol=1e-12)
    np.testing.assert_allclose(agg.betabar, ref.betabar, atol=1e-12)


def test_realize(rng):
    Z = random_z(rng, 3)
    np.testing.assert_array_equal(realize(Z, np.zeros(5)), Z.center)
    beta = np.r_[Z.betabar[:3], 0, 0]
    np.testing.assert_allclose(realize(Z, beta), Z.center + Z.betabar[:3])
    for _ in range(50):
        b = rng.uniform(-1, 1, 5) * Z.betabar
        assert contains_point(Z, None, realize(Z, b))
    with pytest.raises(BetaOutOfRange):
        realize(Z, Z.betabar * 1.1)


def test_validation():
    with pytest.raises(NegativeBeta):
        Zonotope("pe", [0.0], [-1.0])
    with pytest.raises(DimensionMismatch):
        Zonotope("pe", [0.0, 0.0], [1.0, 1.0])
    with pytest.raises(FamilyMismatch):
        Zonotope("hex", [0.0], [1.0])


def test_save_load(tmp_path, rng):
    zs = [random_z(rng, 3) for _ in range(4)]
    save_zonotopes(tmp_path / "z.json", zs)
    assert load_zonotopes(tmp_path / "z.json") == zs


@pytest.mark.parametrize("n", [2, 3, 4])
def test_facet_count_full(n, rng):
    assert facet_count(zonotope_corners(random_z(rng, n))) == n * n + n


def test_facet_count_zeroed_generators():
    # exact counts when one bound is zeroed (generator order: axes, then differences)
    r = np.random.default_rng(0)
    expected = {2: [4, 4, 4], 3: [8, 12, 8, 8, 8], 4: [14, 20, 20, 14, 14, 12, 14]}
    for n, counts in expected.items():
        Z = random_z(r, n)
        got = []
        for i in range(2 * n - 1):
            bb = Z.betabar.copy()
            bb[i] = 0.0
            got.append(facet_count(zonotope_corners(Zonotope("pe", Z.center, bb))))
        assert got == counts


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 4), seed=st.integers(0, 2**32 - 1))
def test_facet_count_bound(n, seed):
    r = np.random.default_rng(seed)
    bb = r.uniform(0.1, 2.0, 2 * n - 1)
    bb[n:][r.uniform(size=n - 1) < 0.5] = 0.0     # axis bounds stay positive: full-dimensional
    assert facet_count(zonotope_corners(Zonotope("pe", np.zeros(n), bb))) <= n * n + n


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 6), seed=st.integers(0, 2**32 - 1), t=st.floats(0.0, 1.0))
def test_membership_convex(n, seed, t):
    r = np.random.default_rng(seed)
    Z = random_z(r, n)
    a = realize(Z, r.uniform(-1, 1, 2 * n - 1) * Z.betabar)
    b = realize(Z, r.uniform(-1, 1, 2 * n - 1) * Z.betabar)
    assert contains_point(Z, None, t * a + (1 - t) * b)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 5), seed=st.integers(0, 2**32 - 1))
def test_sum_contains_member_sums(n, seed):
    r = np.random.default_rng(seed)
    za, zb = random_z(r, n), random_z(r, n)
    s = minkowski_sum([za, zb])
    pa = realize(za, r.uniform(-1, 1, 2 * n - 1) * za.betabar)
    pb = realize(zb, r.uniform(-1, 1, 2 * n - 1) * zb.betabar)
    assert contains_point(s, None, pa + pb)
