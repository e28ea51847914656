"""Euclidean projection onto {beta : G beta = d, -betabar <= beta <= betabar}.

Two algorithms are available. ``"newton"`` (default) runs a semismooth
Newton method with Armijo backtracking on the concave dual

    theta(lam) = min_{|beta| <= betabar} 0.5|beta - x0|^2 - lam.(G beta - d),

whose maximizer gives beta = clip(x0 + G.T lam). The generalized Hessian
G D G.T (D = free-variable indicator) is tridiagonal for the PE family.
``"dykstra"`` alternates exact projections onto the affine set and the box
with Dykstra's correction; it is slower but needs no dual bookkeeping.
"""
from __future__ import annotations

import numpy as np

from .. import kernels
from ..errors import EmptyIntersection

TOL_PROJ = 1e-7
DYKSTRA_MAX_SWEEPS = 100_000
NEWTON_MAX_ITER = 500


def _pe_like(G: np.ndarray) -> bool:
    n, g = G.shape
    if g != 2 * n - 1:
        return False
    from ..zonotope import pe_generators

    return np.array_equal(G, pe_generators(n))


def _dense_newton(G, x0, d, betabar, lam, tol, max_iter):
    n = d.shape[0]
    mu = 1e-10

    def state(lam):
        z = x0 + G.T @ lam
        beta = np.clip(z, -betabar, betabar)
        theta = 0.5 * np.dot(beta - x0, beta - x0) - np.dot(z - x0, beta) + lam @ d
        return z, beta, theta

    z, beta, theta = state(lam)
    r = d - G @ beta
    res = float(np.abs(r).max(initial=0.0))
    it = 0
    while res > tol and it < max_iter:
        free = np.abs(z) < betabar
        H = (G[:, free] @ G[:, free].T) + mu * np.eye(n)
        step = np.linalg.solve(H, r)
        slope = float(r @ step)
        s = 1.0
        while True:
            z_t, beta_t, theta_t = state(lam + s * step)
            if theta_t >= theta + 1e-4 * s * slope or s < 1e-12:
                break
            s *= 0.5
        lam = lam + s * step
        z, beta, theta = z_t, beta_t, theta_t
        r = d - G @ beta
        res = float(np.abs(r).max(initial=0.0))
        it += 1
        if s < 1e-12:
            break
    return beta, lam, it, res


def _dense_dykstra(G, x0, d, betabar, tol, max_sweeps):
    chol = np.linalg.cholesky(G @ G.T)
    x = x0.copy()
    p = np.zeros_like(x0)
    res = np.inf
    for sweep in range(1, max_sweeps + 1):
        v = np.linalg.solve(chol.T, np.linalg.solve(chol, G @ x - d))
        y = x - G.T @ v
        x_new = np.clip(y + p, -betabar, betabar)
        p = y + p - x_new
        res = float(np.abs(G @ x_new - d).max(initial=0.0))
        moved = float(np.abs(x_new - x).max(initial=0.0))
        x = x_new
        if res <= tol and moved <= tol:
            return x, sweep, res
    return x, max_sweeps, res


class AffineBoxProjector:
    """Projection onto a fixed affine-box set, warm-started across calls.

    The dual multipliers from the previous call seed the next Newton solve,
    which is what makes repeated projections inside the subgradient loop
    cheap.
    """

    def __init__(self, G, d, betabar, *, method: str = "newton", tol: float = TOL_PROJ):
        self.G = np.asarray(G, dtype=float)
        self.d = np.ascontiguousarray(d, dtype=float)
        self.betabar = np.ascontiguousarray(betabar, dtype=float)
        if self.G.shape != (self.d.size, self.betabar.size):
            raise ValueError("G, d and betabar have inconsistent shapes")
        if method not in ("newton", "dykstra"):
            raise ValueError(f"unknown projection method {method!r}")
        self.method = method
        scale = max(1.0, float(np.abs(self.d).max(initial=0.0)))
        self.tol = tol * scale
        # Newton usually lands on the exact active set; aim far below tol
        self.target = 1e-12 * scale * max(1, self.G.shape[1])
        self.pe = _pe_like(self.G)
        self.lam = np.zeros(self.d.size)
        self.last_iterations = 0

    def __call__(self, x0) -> np.ndarray:
        x0 = np.ascontiguousarray(x0, dtype=float)
        if self.method == "newton":
            if self.pe:
                beta, lam, it, res = kernels.pe_project_newton(
                    x0, self.d, self.betabar, self.lam, self.target, NEWTON_MAX_ITER)
            else:
                beta, lam, it, res = _dense_newton(
                    self.G, x0, self.d, self.betabar, self.lam, self.target, NEWTON_MAX_ITER)
            if res > self.tol:
                # a stale warm start can stall; retry cold once
                if self.pe:
                    beta, lam, it, res = kernels.pe_project_newton(
                        x0, self.d, self.betabar, np.zeros_like(self.lam), self.target, NEWTON_MAX_ITER)
                else:
                    beta, lam, it, res = _dense_newton(
                        self.G, x0, self.d, self.betabar, np.zeros_like(self.lam),
                        self.target, NEWTON_MAX_ITER)
            self.lam = lam
        else:
            if self.pe:
                beta, it, res = kernels.pe_dykstra(x0, self.d, self.betabar, 1e-2 * self.tol, DYKSTRA_MAX_SWEEPS)
            else:
                beta, it, res = _dense_dykstra(
                    self.G, x0, self.d, self.betabar, 1e-2 * self.tol, DYKSTRA_MAX_SWEEPS)
        self.last_iterations = int(it)
        if res > self.tol:
            raise EmptyIntersection(
                f"projection residual {res:.3e} stalled above tolerance {self.tol:.3e}")
        return np.asarray(beta)


def project_affine_box(G, d, betabar, x0, *, method: str = "newton", tol: float = TOL_PROJ) -> np.ndarray:
    """Euclidean projection of ``x0`` onto ``{beta : G beta = d, |beta| <= betabar}``.

    Raises :class:`EmptyIntersection` when the residual cannot be driven
    below ``tol`` (scaled by ``max(1, |d|_inf)``), which signals an empty set.
    """
    return AffineBoxProjector(G, d, betabar, method=method, tol=tol)(x0)
