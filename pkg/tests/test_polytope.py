import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flexpool.errors import DimensionMismatch, EmptyPolytope
from flexpool.oracles import polytope_vertices
from flexpool.optim import LinearProgram, solve_lp
from flexpool.polytope import (HPolytope, PeParams, RampParams, StateModel, add_ramp_constraints,
                               add_state_constraints, build_pe_polytope, contains, max_inscribed_box,
                               max_inscribed_cube, pe_window_extremes, support_width)

PENT = HPolytope(np.array([[1.0, 0], [0, 1], [-1, 0], [0, -1], [-1, -1]]), np.array([5.0, 4, 0, 0, -1]), 2)
BOX54 = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), np.array([5.0, 4, 0, 0]), 2)


def energy_ok(p, params):
    e = params.e0 + params.t_s * np.cumsum(p)
    return (np.all(p >= params.p_lo - 1e-9) and np.all(p <= params.p_hi + 1e-9)
            and np.all(e >= params.e_lo - 1e-9) and np.all(e <= params.e_hi + 1e-9))


def test_pe_rows_small_case():
    P = build_pe_polytope(PeParams(2, 1.0, -3.0, 3.0, 0.0, 20.0, 10.0))
    assert P.n_rows == 8
    # |p1| <= 3, |p2| <= 3, -10 <= p1 <= 10, -10 <= p1 + p2 <= 10
    for p, ok in [((3, 3), True), ((3.1, 0), False), ((-3, -3), True), ((0, 3.01), False)]:
        assert contains(P, p) is ok
    rows = {tuple(np.r_[a, b]) for a, b in zip(P.A, P.b)}
    assert (1.0, 0.0, 10.0) in rows and (1.0, 1.0, 10.0) in rows and (-1.0, -1.0, 10.0) in rows


def test_wide_energy_gives_box():
    params = PeParams(3, 1.0, [-1, 0, -2], [1, 2, 0.5], -1e3, 1e3, 0.0)
    P = build_pe_polytope(params)
    v = polytope_vertices(P.A, P.b)
    box = np.array(list(np.ndindex(2, 2, 2)), dtype=float)
    corners = params.p_lo + box * (params.p_hi - params.p_lo)
    assert v.shape == corners.shape
    np.testing.assert_allclose(np.unique(np.round(corners, 9), axis=0), v, atol=1e-9)


def test_rejection_sampling_oracle(rng):
    params = PeParams(12, 2.0, -3.0, 3.0, 0.0, 30.0, 15.0)
    P = build_pe_polytope(params)
    pts = rng.uniform(-3, 3, (10_000, 12))
    for p in pts:
        assert contains(P, p) == energy_ok(p, params)


def test_empty_pe_polytope():
    with pytest.raises(EmptyPolytope):
        build_pe_polytope(PeParams(3, 1.0, 1.0, 2.0, 0.0, 1.0, 0.0))


def test_zero_ramp_forces_constant():
    P = build_pe_polytope(PeParams(4, 1.0, -3.0, 3.0, -100.0, 100.0, 0.0))
    Q = add_ramp_constraints(P, RampParams(np.zeros(3), np.zeros(3)), 1.0)
    for k in range(1, 4):
        f = np.zeros(4)
        f[k], f[0] = 1.0, -1.0
        assert support_width(Q, f) == pytest.approx(0.0, abs=1e-9)


def test_infinite_ramp_is_noop():
    P = build_pe_polytope(PeParams(3, 1.0, -3.0, 3.0, -100.0, 100.0, 0.0))
    assert add_ramp_constraints(P, RampParams(np.full(2, -np.inf), np.full(2, np.inf)), 1.0) is P


def test_ramp_two_step_reach():
    P = build_pe_polytope(PeParams(3, 1.0, 0.0, 10.0, -1e3, 1e3, 0.0))
    Q = add_ramp_constraints(P, RampParams(np.full(2, -2.0), np.full(2, 2.0)), 1.0)
    # max p3 with p1 = 0
    sol = solve_lp(LinearProgram([0, 0, -1.0], Q.A, Q.b, [[1.0, 0, 0]], [0.0]))
    assert -sol.objective == pytest.approx(4.0)


def test_ramp_wrong_length():
    P = build_pe_polytope(PeParams(3, 1.0, 0.0, 1.0, -10, 10, 0.0))
    with pytest.raises(DimensionMismatch):
        add_ramp_constraints(P, RampParams([0.0], [1.0]), 1.0)


def test_scalar_state_reproduces_energy_rows():
    N, ts = 4, 0.5
    params = PeParams(N, ts, -3.0, 3.0, 0.0, 20.0, 8.0)
    P = build_pe_polytope(PeParams(N, ts, -3.0, 3.0, -np.inf, np.inf, 8.0))
    model = StateModel(np.ones((N, 1, 1)), np.zeros((N, 1, 1)), np.full((N, 1), ts), np.zeros((N, 1)),
                       [8.0], np.zeros((N, 1)), np.full((N, 1), 20.0))
    Q = add_state_constraints(P, model)
    R = build_pe_polytope(params)

    def normalized(H):
        rows = np.hstack([H.A, H.b[:, None]]) / np.linalg.norm(H.A, axis=1, keepdims=True)
        return np.unique(np.round(rows, 12), axis=0)

    np.testing.assert_allclose(normalized(Q), normalized(R), atol=1e-12)


def test_memoryless_state_is_per_step_bound():
    N = 3
    P = build_pe_polytope(PeParams(N, 1.0, -5.0, 5.0, -1e3, 1e3, 0.0))
    model = StateModel(np.zeros((N, 1, 1)), np.zeros((N, 1, 1)), np.full((N, 1), 2.0), np.zeros((N, 1)),
                       [0.0], np.full((N, 1), -2.0), np.full((N, 1), 4.0))
    Q = add_state_constraints(P, model)
    # 2 p_k in [-2, 4]  ->  p_k in [-1, 2]
    assert support_width(Q, [1.0, 0, 0]) == pytest.approx(3.0)
    assert contains(Q, [2.0, 2.0, -1.0]) and not contains(Q, [2.1, 0, 0])


def test_thermal_model_rollout(rng):
    N, a, c = 4, 0.9, 0.5
    lo, hi = rng.uniform(-2, 0, N), rng.uniform(2, 4, N)
    P = build_pe_polytope(PeParams(N, 1.0, -4.0, 4.0, -1e3, 1e3, 0.0))
    model = StateModel(np.full((N, 1, 1), a), np.zeros((N, 1, 1)), np.full((N, 1), c), np.zeros((N, 1)),
                       [1.0], lo[:, None], hi[:, None])
    Q = add_state_constraints(P, model)
    for p in rng.uniform(-4, 4, (1000, N)):
        x, ok = 1.0, True
        for k in range(N):
            x = a * x + c * p[k]
            ok &= lo[k] - 1e-9 <= x <= hi[k] + 1e-9
        assert contains(Q, p) == ok


def test_state_model_step_count():
    P = build_pe_polytope(PeParams(4, 1.0, -1.0, 1.0, -10, 10, 0.0))
    model = StateModel(np.ones((2, 1, 1)), np.zeros((2, 1, 1)), np.ones((2, 1)), np.zeros((2, 1)),
                       [0.0], np.zeros((2, 1)), np.ones((2, 1)))
    with pytest.raises(DimensionMismatch):
        add_state_constraints(P, model)


def test_support_widths():
    assert support_width(BOX54, [1.0, 0]) == pytest.approx(5.0)
    assert support_width(BOX54, np.array([1.0, 1]) / math.sqrt(2)) == pytest.approx(9 / math.sqrt(2))
    assert support_width(PENT, np.array([1.0, 1]) / math.sqrt(2)) == pytest.approx(8 / math.sqrt(2))


def grid_cube(A, b, step=1e-3):
    # best half-edge over a grid of centers: r(c) = min_i (b_i - a_i.c) / |a_i|_1
    xs = np.arange(0, 5 + step, step * 10)
    X, Y = np.meshgrid(xs, xs)
    C = np.stack([X.ravel(), Y.ravel()], 1)
    r = ((b[None, :] - C @ A.T) / np.abs(A).sum(1)[None, :]).min(1)
    return r.max()


def test_inscribed_cube():
    c, r = max_inscribed_cube(HPolytope(np.vstack([np.eye(2), -np.eye(2)]), np.array([2.0, 3, 2, 3]), 2))
    assert r == pytest.approx(2.0)
    c, r = max_inscribed_cube(PENT)
    assert r == pytest.approx(grid_cube(PENT.A, PENT.b), abs=1e-2)
    assert r == pytest.approx(2.0)  # the pentagon's 4 x 4 square
    point = HPolytope(np.vstack([np.eye(2), -np.eye(2)]), np.array([1.0, 1, -1, -1]), 2)
    assert max_inscribed_cube(point)[1] == pytest.approx(0.0, abs=1e-9)


def test_inscribed_box():
    lo, hi = max_inscribed_box(BOX54, max_inscribed_cube(BOX54))
    np.testing.assert_allclose(lo, [0, 0], atol=1e-7)
    np.testing.assert_allclose(hi, [5, 4], atol=1e-7)
    cube = max_inscribed_cube(PENT)
    lo, hi = max_inscribed_box(PENT, cube)
    # grid oracle: boxes [x0, 5] x [y0, 4] with x0 + y0 >= 1 containing the cube maximize edge sum 9 - 1
    assert np.sum(hi - lo) == pytest.approx(8.0, abs=1e-3)
    assert np.all(lo <= cube[0] - cube[1] + 1e-7) and np.all(hi >= cube[0] + cube[1] - 1e-7)


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 2**32 - 1))
def test_window_extremes_match_lp(n, seed):
    r = np.random.default_rng(seed)
    cap = r.uniform(5, 40)
    params = PeParams(n, r.uniform(0.25, 3), r.uniform(-4, 0), r.uniform(0, 4), 0.0, cap, r.uniform(0, 1) * cap)
    P = build_pe_polytope(params)
    hi, lo = pe_window_extremes(params)
    for j in range(n):
        for k in range(j, n):
            f = np.zeros(n)
            f[j:k + 1] = 1.0
            up = -solve_lp(LinearProgram(-f, P.A, P.b)).objective
            down = solve_lp(LinearProgram(f, P.A, P.b)).objective
            assert hi[j, k] == pytest.approx(up, abs=1e-7)
            assert lo[j, k] == pytest.approx(down, abs=1e-7)


def test_window_extremes_empty():
    with pytest.raises(EmptyPolytope):
        pe_window_extremes(PeParams(3, 1.0, 1.0, 2.0, 0.0, 1.0, 0.0))


def test_polytope_json_roundtrip():
    P = build_pe_polytope(PeParams(3, 1.0, -1.0, 1.0, 0.0, 5.0, 2.0))
    Q = HPolytope.from_dict(P.to_dict())
    np.testing.assert_array_equal(P.A, Q.A)
    np.testing.assert_array_equal(P.b, Q.b)
    assert not P.A.flags.writeable


def test_params_validation():
    with pytest.raises(ValueError):
        PeParams(2, 1.0, 1.0, 0.0, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        PeParams(2, 0.0, 0.0, 1.0, 0.0, 1.0, 0.0)
    p = PeParams(2, 1.0, -1.0, 1.0, 0.0, 1.0, 0.5)
    assert PeParams.from_dict(p.to_dict()).to_dict() == p.to_dict()
