"""Brute-force references used by tests and the benchmark suites.

Everything here trades speed for independence from the main code paths:
vertex and facet enumeration go through explicit corner lists and
``scipy.spatial.ConvexHull``, and membership or cost questions are posed as
plain LPs.
"""
from __future__ import annotations

import itertools

import numpy as np
from scipy.spatial import ConvexHull

from .optim import LinearProgram, LpStatus, solve_lp
from .zonotope import Zonotope


def zonotope_corners(Z: Zonotope) -> np.ndarray:
    """All ``2^g`` points ``c + G s`` with ``s_i = +-betabar_i`` (duplicates kept)."""
    g = Z.n_generators
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=g)))
    return Z.center + (signs * Z.betabar) @ Z.G.T


def hull_vertices(points: np.ndarray, decimals: int = 9) -> np.ndarray:
    """Extreme points of a point cloud, sorted lexicographically."""
    points = np.asarray(points, dtype=float)
    _, first = np.unique(np.round(points, decimals), axis=0, return_index=True)
    pts = points[np.sort(first)]
    if pts.shape[0] <= pts.shape[1]:
        return pts
    hull = ConvexHull(pts)
    v = pts[hull.vertices]
    # qhull may keep points that sit on an edge up to round-off; drop any
    # point that lies in the hull of the others
    tol = 1e-9 * max(1.0, float(np.abs(v).max()))
    keep = np.ones(len(v), dtype=bool)
    for i in range(len(v)):
        others = v[keep & (np.arange(len(v)) != i)]
        eq = ConvexHull(others).equations
        eq = eq / np.linalg.norm(eq[:, :-1], axis=1, keepdims=True)
        if np.max(eq[:, :-1] @ v[i] + eq[:, -1]) <= tol:
            keep[i] = False
    v = v[keep]
    return v[np.lexsort(v.T[::-1])]


def zonotope_vertices(Z: Zonotope) -> np.ndarray:
    return hull_vertices(zonotope_corners(Z))


def facet_count(points: np.ndarray, decimals: int = 7) -> int:
    """Number of distinct facets of the hull of ``points`` (coplanar simplices merged).

    Requires a full-dimensional point set.
    """
    hull = ConvexHull(np.unique(np.round(points, 12), axis=0))
    eq = hull.equations.copy()
    eq /= np.linalg.norm(eq[:, :-1], axis=1, keepdims=True)
    return int(np.unique(np.round(eq, decimals), axis=0).shape[0])


def lp_membership(Z: Zonotope, p, tol: float = 1e-8) -> bool:
    """Is there ``beta`` with ``G beta = p - c`` and ``|beta| <= betabar``?

    Posed as: minimize the total bound excess ``s`` with
    ``|beta_i| <= betabar_i + s``; ``p`` is a member iff the optimum is ~0.
    """
    G = Z.G
    n, g = G.shape
    d = np.asarray(p, float) - Z.center
    # variables [beta, s]
    cost = np.zeros(g + 1)
    cost[-1] = 1.0
    ones = np.ones((g, 1))
    a_in = np.vstack([np.hstack([np.eye(g), -ones]), np.hstack([-np.eye(g), -ones])])
    b_in = np.concatenate([Z.betabar, Z.betabar])
    a_eq = np.hstack([G, np.zeros((n, 1))])
    lower = np.concatenate([np.full(g, -np.inf), [0.0]])
    sol = solve_lp(LinearProgram(cost, a_in, b_in, a_eq, d, lower=lower))
    if sol.status is not LpStatus.OPTIMAL:
        return False
    scale = max(1.0, float(np.abs(d).max(initial=0.0)), float(Z.betabar.max(initial=0.0)))
    return bool(sol.objective <= tol * scale)


def infimal_convolution_lp(costs, beta_agg) -> float:
    """``min sum_j T_j(beta_j)`` s.t. ``sum_j beta_j = beta_agg``, ``|beta_j| <= betabar_j``.

    Each component is written as an epigraph over its affine pieces.
    """
    costs = list(costs)
    J = len(costs)
    g = costs[0].n_generators
    beta_agg = np.asarray(beta_agg, float).ravel()
    # variables: beta (J*g) then t (J*g)
    nb = J * g
    rows, rhs = [], []
    lower = np.full(2 * nb, -np.inf)
    upper = np.full(2 * nb, np.inf)
    const = 0.0
    for j, cost in enumerate(costs):
        const += cost.t_fix
        for i, comp in enumerate(cost.components):
            col = j * g + i
            bb = comp.betabar
            lower[col], upper[col] = -bb, bb
            if comp.lengths.size == 0:
                lower[nb + col] = upper[nb + col] = comp.left_value
                continue
            starts = -bb + np.concatenate([[0.0], np.cumsum(comp.lengths)[:-1]])
            vals = comp.left_value + np.concatenate([[0.0], np.cumsum(comp.lengths * comp.slopes)[:-1]])
            for s0, v0, q in zip(starts, vals, comp.slopes):
                r = np.zeros(2 * nb)
                r[col] = q
                r[nb + col] = -1.0
                rows.append(r)
                rhs.append(q * s0 - v0)
    a_eq = np.zeros((g, 2 * nb))
    for j in range(J):
        a_eq[:, j * g:(j + 1) * g] = np.eye(g)
    cost_vec = np.concatenate([np.zeros(nb), np.ones(nb)])
    a_in = np.array(rows) if rows else np.zeros((0, 2 * nb))
    sol = solve_lp(LinearProgram(cost_vec, a_in, np.array(rhs), a_eq, beta_agg, lower, upper))
    if sol.status is not LpStatus.OPTIMAL:
        raise ValueError(f"infimal convolution LP ended with status {sol.status.name}")
    return float(sol.objective + const)


def polytope_vertices(A: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Vertices of ``{x : A x <= b}`` by trying every ``N``-subset of rows (small ``N`` only)."""
    m, n = A.shape
    verts = []
    for rows in itertools.combinations(range(m), n):
        sub = A[list(rows)]
        if abs(np.linalg.det(sub)) < 1e-12:
            continue
        x = np.linalg.solve(sub, b[list(rows)])
        if np.all(A @ x <= b + tol * (1.0 + np.abs(b))):
            verts.append(x)
    if not verts:
        return np.zeros((0, n))
    return np.unique(np.round(np.array(verts), 9), axis=0)
