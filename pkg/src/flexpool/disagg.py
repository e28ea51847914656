"""Split an aggregate power trajectory among the members of a pool.

The aggregate problem lives in the generator coordinates of the aggregate
zonotope::

    minimize T_agg(beta)  s.t.  c_agg + G beta = p_agg,  |beta| <= betabar_agg

It is solved by a projected subgradient method with step ``a / (k+1)`` and
a best-so-far record. The minimizer is then split per generator by walking
the slope-sorted merged segment list (:func:`distribute`), which is the
cheapest split by construction of the merge.

Two exact LP references are included for testing and benchmarking: one over
generator coordinates of the member zonotopes and one over H-polytopes with
linear power costs.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .costs import AggregateCost, eval_with_subgradient
from .errors import (DimensionMismatch, InfeasibleError, InfeasibleTarget, MaxItersExceeded,
                     NumericalFailure, UnboundedError)
from .optim import AffineBoxProjector, LinearProgram, LpStatus, solve_lp
from .zonotope import Zonotope, contains_points, realize, violated_facet

TOL_SUM_BETA = 1e-9
TOL_SUM_P = 1e-7


@dataclass(frozen=True)
class SubgradientParams:
    a: float | None = None      # None: mean of the aggregate bounds
    h: int = 5
    eps: float = 1e-3
    max_iters: int = 100_000
    eps_div_guard: float = 1e-9
    projection: str = "newton"

    def __post_init__(self):
        if self.a is not None and not self.a > 0:
            raise ValueError("step-size numerator a must be positive")
        if self.h < 1:
            raise ValueError("termination window h must be at least 1")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")


@dataclass
class SubgradientOutcome:
    beta: np.ndarray
    objective: float
    iterations: int
    trace: np.ndarray           # best-so-far value after each iteration
    converged: bool


@dataclass
class DisaggregationResult:
    beta_agg_star: np.ndarray
    beta_star: np.ndarray       # (J, g)
    trajectories: np.ndarray    # (J, N)
    objective: float
    iterations: int
    trace: np.ndarray = field(repr=False)
    converged: bool = True
    gap_estimate: float | None = None


def check_target(Zagg: Zonotope, p_agg) -> np.ndarray:
    p_agg = np.asarray(p_agg, dtype=float).ravel()
    if p_agg.size != Zagg.N:
        raise DimensionMismatch(f"p_agg has {p_agg.size} entries, expected {Zagg.N}")
    facet = violated_facet(Zagg, p_agg)
    if facet is not None:
        raise InfeasibleTarget(f"aggregate trajectory violates facet direction {facet}", facet)
    return p_agg


def disaggregate_subgradient(p_agg, Zagg: Zonotope, ac: AggregateCost,
                             params: SubgradientParams = SubgradientParams()) -> SubgradientOutcome:
    """Projected subgradient minimization of ``T_agg`` over the aggregate slice."""
    p_agg = check_target(Zagg, p_agg)
    if ac.n_generators != Zagg.n_generators:
        raise DimensionMismatch("aggregate cost and zonotope disagree on generator count")
    bb = Zagg.betabar
    proj = AffineBoxProjector(Zagg.G, p_agg - Zagg.center, bb, method=params.projection)
    a = params.a if params.a is not None else float(bb.mean())
    if not a > 0:
        a = 1.0
    beta = proj(np.zeros(bb.size))
    # V[k] is the best value seen among beta(0..k-1); V[0] = inf
    V = [math.inf]
    best = beta
    k = 0
    converged = True
    while True:
        W, grad = eval_with_subgradient(ac, beta)
        if W < V[k]:
            best = beta
        V.append(min(V[k], W))
        beta = proj(beta - (a / (k + 1)) * grad)
        k += 1
        ref = V[max(0, k - params.h)]
        if (ref - V[k]) / max(abs(V[k]), params.eps_div_guard) <= params.eps:
            break
        if k >= params.max_iters:
            converged = False
            warnings.warn(f"subgradient stopped at the iteration cap {params.max_iters}",
                          MaxItersExceeded, stacklevel=2)
            break
    return SubgradientOutcome(best, V[-1], k, np.asarray(V[1:]), converged)


def distribute(beta_agg, betabars, ac: AggregateCost) -> np.ndarray:
    """Per-system ``beta`` from the left-to-right fill of the merged segments.

    Each system's coordinate starts at ``-betabar^(j)`` and grows by the length
    of its own segments consumed up to position ``betabar_agg + beta_agg``.
    Returns a ``(J, g)`` array.
    """
    beta_agg = np.asarray(beta_agg, dtype=float).ravel()
    betabars = np.asarray(betabars, dtype=float)
    pos = np.clip(ac.betabar + beta_agg, 0.0, 2.0 * ac.betabar)
    used = kernels.distribute_fill(ac.offsets, ac.lengths, ac.owners, np.ascontiguousarray(pos),
                                   ac.n_systems)
    return np.minimum(-betabars + used, betabars)


def betas_to_trajectories(zs, betas) -> np.ndarray:
    return np.array([realize(z, b) for z, b in zip(zs, betas)])


def disaggregate(p_agg, zs, ac: AggregateCost, params: SubgradientParams = SubgradientParams(),
                 Zagg: Zonotope | None = None) -> DisaggregationResult:
    """Full pipeline: subgradient solve, distribution, trajectories, invariant checks."""
    zs = list(zs)
    if Zagg is None:
        from .zonotope import minkowski_sum

        Zagg = minkowski_sum(zs)
    out = disaggregate_subgradient(p_agg, Zagg, ac, params)
    betabars = np.array([z.betabar for z in zs])
    betas = distribute(out.beta, betabars, ac)
    traj = betas_to_trajectories(zs, betas)
    check_invariants(np.asarray(p_agg, float), Zagg, zs, out.beta, betas, traj)
    return DisaggregationResult(out.beta, betas, traj, out.objective, out.iterations, out.trace,
                                out.converged)


def check_invariants(p_agg, Zagg, zs, beta_agg, betas, traj) -> None:
    """Raise :class:`NumericalFailure` if any feasibility invariant is broken."""
    bscale = max(1.0, float(Zagg.betabar.max(initial=0.0)))
    pscale = max(1.0, float(np.abs(p_agg).max(initial=0.0)))
    if np.abs(betas.sum(axis=0) - beta_agg).max(initial=0.0) > TOL_SUM_BETA * bscale:
        raise NumericalFailure("member coordinates do not sum to the aggregate")
    if np.abs(traj.sum(axis=0) - p_agg).max(initial=0.0) > TOL_SUM_P * pscale:
        raise NumericalFailure("member trajectories do not sum to the aggregate trajectory")
    inside = contains_points(zs, traj)
    if not inside.all():
        j = int(np.argmin(inside))
        raise NumericalFailure(f"trajectory of system {j} leaves its feasible set")


# -- exact references ---------------------------------------------------------

def _solve(lp, backend):
    sol = solve_lp(lp, backend=backend)
    if sol.status is LpStatus.INFEASIBLE:
        raise InfeasibleError("aggregate trajectory is not reachable by the pool")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedError("disaggregation LP is unbounded")
    return sol


def disaggregate_beta_lp(p_agg, zs, costs, *, backend: str = "simplex"):
    """Exact minimum of ``sum_j T^(j)(beta^(j))`` over member generator coordinates.

    Single-segment components enter the objective directly; others get one
    epigraph variable bounded below by each affine piece. Returns
    ``(betas (J, g), objective)``.
    """
    zs, costs = list(zs), list(costs)
    J = len(zs)
    n, g = zs[0].N, zs[0].n_generators
    G = zs[0].G
    p_agg = np.asarray(p_agg, dtype=float).ravel()
    d = p_agg - np.sum([z.center for z in zs], axis=0)
    nb = J * g
    obj = np.zeros(nb)
    const = 0.0
    epi_rows, epi_rhs, epi_var = [], [], []
    for j, cost in enumerate(costs):
        const += cost.t_fix
        for i, comp in enumerate(cost.components):
            col = j * g + i
            m = comp.lengths.size
            bb = comp.betabar
            if m == 0:
                const += comp.left_value
                continue
            if m == 1:
                obj[col] += comp.slopes[0]
                const += comp.left_value + comp.slopes[0] * bb
                continue
            starts = -bb + np.concatenate([[0.0], np.cumsum(comp.lengths)[:-1]])
            values = comp.left_value + np.concatenate([[0.0], np.cumsum(comp.lengths * comp.slopes)[:-1]])
            t = len(epi_var)
            epi_var.append(col)
            for s0, v0, q in zip(starts, values, comp.slopes):
                # q * beta - t <= q * s0 - v0
                epi_rows.append((col, t, q))
                epi_rhs.append(q * s0 - v0)
    ne = len(epi_var)
    cost_vec = np.concatenate([obj, np.ones(ne)])
    a_eq = np.zeros((n, nb + ne))
    for j in range(J):
        a_eq[:, j * g:(j + 1) * g] = G
    a_in = np.zeros((len(epi_rows), nb + ne))
    for r, (col, t, q) in enumerate(epi_rows):
        a_in[r, col] = q
        a_in[r, nb + t] = -1.0
    bbs = np.concatenate([z.betabar for z in zs])
    lower = np.concatenate([-bbs, np.full(ne, -np.inf)])
    upper = np.concatenate([bbs, np.full(ne, np.inf)])
    lp = LinearProgram(cost_vec, a_in, np.asarray(epi_rhs), a_eq, d, lower, upper)
    sol = _solve(lp, backend)
    return sol.x[:nb].reshape(J, g), float(sol.objective + const)


def disaggregate_lp_oracle(p_agg, polytopes, costs, *, backend: str = "simplex"):
    """Exact split of ``p_agg`` over H-polytopes with linear power costs.

    ``costs`` holds one ``(phi, const)`` pair per system meaning
    ``phi.T p + const``. Returns ``(trajectories (J, N), objective)``.
    """
    polytopes = list(polytopes)
    J = len(polytopes)
    n = polytopes[0].N
    p_agg = np.asarray(p_agg, dtype=float).ravel()
    rows = sum(P.n_rows for P in polytopes)
    a_in = np.zeros((rows, J * n))
    b_in = np.zeros(rows)
    r = 0
    for j, P in enumerate(polytopes):
        a_in[r:r + P.n_rows, j * n:(j + 1) * n] = P.A
        b_in[r:r + P.n_rows] = P.b
        r += P.n_rows
    a_eq = np.tile(np.eye(n), (1, J))
    phi = np.concatenate([np.asarray(c[0], float) for c in costs])
    const = float(sum(c[1] for c in costs))
    sol = _solve(LinearProgram(phi, a_in, b_in, a_eq, p_agg), backend)
    return sol.x.reshape(J, n), float(sol.objective + const)
