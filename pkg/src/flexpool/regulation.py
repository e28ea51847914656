"""Regulation-power capacity, reservation and cheapest baselines.

Offering ``r`` kW of symmetric regulation means an axis-aligned cube of
half-edge ``r`` around the baseline must fit in the aggregate feasible set.
For a pool of zonotopes the largest such ``r`` comes from one LP over the
members' generator coordinates. Reserving a share ``eta`` of that capacity
shrinks every member's bounds to ``betabar - eta |beta_max|``; the cheapest
baseline inside the shrunk pool is then a box-constrained minimization of the
merged cost, which separates per generator and is solved exactly.

Costs here are the members' total costs plus energy bought at the expected
wholesale price ``v_hat``, i.e. member ``j`` is priced at ``v^(j) - v_hat``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .costs import (AggregateCost, build_system_cost, eval_with_subgradient, merge_aggregate_cost,
                    zero_flex_cost)
from .disagg import betas_to_trajectories, distribute
from .errors import EmptyRemainder, InfeasibleError, UnboundedError
from .optim import LinearProgram, LpStatus, solve_lp
from .zonotope import Zonotope, check_family

TOL_BETA = 1e-9


@dataclass
class CapacityResult:
    r_max: float
    beta_max: np.ndarray        # (J, g)


@dataclass
class BidPoint:
    eta: float
    r: float
    baseline_cost: float
    offer_cost: float


@dataclass
class BidCurve:
    points: list
    eta_grid: tuple
    price_source: str = ""

    def rows(self):
        return [(p.eta, p.r, p.baseline_cost, p.offer_cost) for p in self.points]


@dataclass
class Baseline:
    cost: float
    beta_agg: np.ndarray
    betas: np.ndarray = field(repr=False)
    trajectories: np.ndarray = field(repr=False)


def _lp_or_raise(lp):
    sol = solve_lp(lp)
    if sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleError("regulation LP is infeasible")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedError("regulation LP is unbounded")
    return sol


def max_capacity_zono(zs) -> CapacityResult:
    """Largest ``r`` with ``G beta_j >= 0``, ``G sum beta_j >= r 1``, ``|beta_j| <= betabar_j``."""
    zs = list(zs)
    check_family(zs)
    J, n, g = len(zs), zs[0].N, zs[0].n_generators
    G = zs[0].G
    nv = J * g + 1
    a_in = np.zeros((J * n + n, nv))
    for j in range(J):
        a_in[j * n:(j + 1) * n, j * g:(j + 1) * g] = -G
        a_in[J * n:, j * g:(j + 1) * g] = -G
    a_in[J * n:, -1] = 1.0
    bbs = np.concatenate([z.betabar for z in zs])
    cost = np.zeros(nv)
    cost[-1] = -1.0
    lower = np.concatenate([-bbs, [0.0]])
    upper = np.concatenate([bbs, [np.inf]])
    sol = _lp_or_raise(LinearProgram(cost, a_in, np.zeros(a_in.shape[0]), lower=lower, upper=upper))
    return CapacityResult(max(0.0, float(sol.x[-1])), sol.x[:-1].reshape(J, g))


def max_capacity_poly(ps) -> float:
    """Largest ``r`` such that per-member cubes ``B(p_j, r_j)`` fit and ``sum r_j >= r 1``."""
    ps = list(ps)
    J, n = len(ps), ps[0].N
    nv = 2 * J * n + 1
    rows = sum(P.n_rows for P in ps) + n
    a_in = np.zeros((rows, nv))
    b_in = np.zeros(rows)
    r0 = 0
    for j, P in enumerate(ps):
        k = P.n_rows
        a_in[r0:r0 + k, j * n:(j + 1) * n] = P.A
        a_in[r0:r0 + k, J * n + j * n:J * n + (j + 1) * n] = np.abs(P.A)
        b_in[r0:r0 + k] = P.b
        r0 += k
    for j in range(J):
        a_in[r0:, J * n + j * n:J * n + (j + 1) * n] = -np.eye(n)
    a_in[r0:, -1] = 1.0
    cost = np.zeros(nv)
    cost[-1] = -1.0
    lower = np.concatenate([np.full(J * n, -np.inf), np.zeros(J * n + 1)])
    sol = _lp_or_raise(LinearProgram(cost, a_in, b_in, lower=lower))
    return max(0.0, float(sol.x[-1]))


def remaining_bounds(zs, cap: CapacityResult, eta: float) -> np.ndarray:
    """``betabar_j - eta |beta_max_j|`` per member, clamped at zero."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError("eta must lie in [0, 1]")
    bbs = np.array([z.betabar for z in zs])
    rem = bbs - eta * np.abs(cap.beta_max)
    if np.any(rem < -TOL_BETA * np.maximum(1.0, bbs)):
        raise EmptyRemainder("reservation exceeds a member's bounds")
    return np.clip(rem, 0.0, bbs)


def minimize_box(ac: AggregateCost, method: str = "exact", max_iters: int = 100_000,
                 h: int = 5, eps: float = 1e-3) -> np.ndarray:
    """Minimizer of ``T_agg`` over ``|beta| <= betabar_agg`` (no equality rows).

    ``"exact"`` consumes every negative-slope segment per generator.
    ``"subgradient"`` runs the projected subgradient loop with clipping as
    the projection.
    """
    bb = ac.betabar
    if method == "exact":
        pos = np.zeros(bb.size)
        for i in range(bb.size):
            l, q, _ = ac.segments(i)
            pos[i] = l[q < 0].sum()
        return np.clip(pos - bb, -bb, bb)
    if method != "subgradient":
        raise ValueError(f"unknown method {method!r}")
    a = float(bb.mean()) if bb.size and bb.mean() > 0 else 1.0
    beta = np.zeros(bb.size)
    V = [math.inf]
    best = beta
    k = 0
    while True:
        W, grad = eval_with_subgradient(ac, beta)
        if W < V[k]:
            best = beta
        V.append(min(V[k], W))
        beta = np.clip(beta - (a / (k + 1)) * grad, -bb, bb)
        k += 1
        if (V[max(0, k - h)] - V[k]) / max(abs(V[k]), 1e-9) <= eps or k >= max_iters:
            return best


def baseline_cost_zono(zs, cap: CapacityResult, eta: float, prices, v_hat, t_s: float,
                       flex=None, method: str = "exact") -> Baseline:
    """Cheapest baseline after reserving ``eta`` of the pool's capacity.

    ``prices`` holds one contract price vector per member (or one shared
    vector); ``flex`` optionally holds per-member flexibility components on
    the full bounds (default zero).
    """
    zs = list(zs)
    J = len(zs)
    v_hat = np.asarray(v_hat, dtype=float).ravel()
    prices = np.broadcast_to(np.asarray(prices, dtype=float), (J, zs[0].N))
    rem = remaining_bounds(zs, cap, eta)
    costs = []
    zs_rem = []
    for j, z in enumerate(zs):
        zr = Zonotope(z.family, z.center, rem[j])
        comps = zero_flex_cost(z.betabar) if flex is None else flex[j]
        comps = [c.restrict(h) for c, h in zip(comps, rem[j])]
        costs.append(build_system_cost(comps, prices[j] - v_hat, zr, t_s))
        zs_rem.append(zr)
    ac = merge_aggregate_cost(costs)
    beta = minimize_box(ac, method)
    value = eval_with_subgradient(ac, beta)[0]
    betas = distribute(beta, rem, ac)
    return Baseline(float(value), beta, betas, betas_to_trajectories(zs_rem, betas))


def baseline_cost_poly_oracle(ps, prices, v_hat, t_s: float, r_target: float) -> float:
    """Exact cheapest baseline over H-polytopes with regulation ``r_target``.

    Members are priced linearly at ``v^(j) - v_hat`` (no flexibility cost).
    """
    ps = list(ps)
    J, n = len(ps), ps[0].N
    v_hat = np.asarray(v_hat, dtype=float).ravel()
    prices = np.broadcast_to(np.asarray(prices, dtype=float), (J, n))
    nv = 2 * J * n
    rows = sum(P.n_rows for P in ps) + n
    a_in = np.zeros((rows, nv))
    b_in = np.zeros(rows)
    r0 = 0
    for j, P in enumerate(ps):
        k = P.n_rows
        a_in[r0:r0 + k, j * n:(j + 1) * n] = P.A
        a_in[r0:r0 + k, J * n + j * n:J * n + (j + 1) * n] = np.abs(P.A)
        b_in[r0:r0 + k] = P.b
        r0 += k
    for j in range(J):
        a_in[r0:, J * n + j * n:J * n + (j + 1) * n] = -np.eye(n)
    b_in[r0:] = -r_target
    cost = np.concatenate([(-t_s * (prices - v_hat)).ravel(), np.zeros(J * n)])
    lower = np.concatenate([np.full(J * n, -np.inf), np.zeros(J * n)])
    return float(_lp_or_raise(LinearProgram(cost, a_in, b_in, lower=lower)).objective)


def bid_curve(zs, prices, v_hat, t_s: float, eta_grid=None, flex=None,
              cap: CapacityResult | None = None, price_source: str = "") -> BidCurve:
    """Baseline cost and offer cost ``R(r) - R(0)`` for ``r = eta r_max``."""
    if eta_grid is None:
        eta_grid = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
    eta_grid = tuple(float(e) for e in eta_grid)
    if any(e < 0 or e > 1 for e in eta_grid) or list(eta_grid) != sorted(eta_grid):
        raise ValueError("eta grid must be ascending within [0, 1]")
    zs = list(zs)
    if cap is None:
        cap = max_capacity_zono(zs)
    base0 = baseline_cost_zono(zs, cap, 0.0, prices, v_hat, t_s, flex).cost
    points = []
    for eta in eta_grid:
        cost = base0 if eta == 0.0 else baseline_cost_zono(zs, cap, eta, prices, v_hat, t_s, flex).cost
        points.append(BidPoint(eta, eta * cap.r_max, cost, cost - base0))
    return BidCurve(points, eta_grid, price_source)
