"""Pure-Python/numpy implementations of the hot kernels.

Same signatures and semantics as the compiled ``_kernels`` module; used when
the extension is not built or ``FLEXPOOL_PURE=1`` is set.
"""
import math

import numpy as np
from scipy.linalg import solveh_banded

SQRT_HALF = math.sqrt(0.5)


def aggregate_eval(offsets, cum_len, cum_int, slopes, anchors, betabar, beta):
    """Sum of anchored segment integrals and the per-generator right slopes."""
    g = betabar.shape[0]
    grad = np.zeros(g)
    total = 0.0
    for i in range(g):
        a, b = offsets[i], offsets[i + 1]
        total += anchors[i]
        if b == a:
            continue
        pos = betabar[i] + beta[i]
        m = int(np.searchsorted(cum_len[a:b], pos, side="right"))
        prev_len = cum_len[a + m - 1] if m > 0 else 0.0
        prev_int = cum_int[a + m - 1] if m > 0 else 0.0
        q = slopes[a + min(m, b - a - 1)]
        total += prev_int + (pos - prev_len) * q
        grad[i] = q
    return total, grad


def distribute_fill(offsets, lengths, owners, positions, n_systems):
    """Consume each generator's merged segments from the left up to ``positions``.

    Returns an ``(n_systems, g)`` array of per-system consumed lengths.
    """
    g = positions.shape[0]
    out = np.zeros((n_systems, g))
    for i in range(g):
        a, b = offsets[i], offsets[i + 1]
        if b == a:
            continue
        seg = lengths[a:b]
        ends = np.cumsum(seg)
        starts = ends - seg
        take = np.clip(positions[i] - starts, 0.0, seg)
        np.add.at(out[:, i], owners[a:b], take)
    return out


def pe_apply(n, beta):
    """G @ beta for the PE generator family."""
    p = beta[:n].copy()
    if n > 1:
        diff = beta[n:] * SQRT_HALF
        p[:-1] -= diff
        p[1:] += diff
    return p


def pe_apply_t(n, lam):
    """G.T @ lam for the PE generator family."""
    out = np.empty(2 * n - 1)
    out[:n] = lam
    out[n:] = (lam[1:] - lam[:-1]) * SQRT_HALF
    return out


def _pe_gdg_banded(n, free, mu):
    """Upper banded storage of G diag(free) G.T + mu I."""
    ab = np.zeros((2, n))
    diag = free[:n] + mu
    if n > 1:
        fd = free[n:]
        diag[:-1] += 0.5 * fd
        diag[1:] += 0.5 * fd
        ab[0, 1:] = -0.5 * fd
    ab[1] = diag
    return ab


def _banded_solve(ab, rhs):
    if ab.shape[1] == 1:
        return rhs / ab[1]
    return solveh_banded(ab, rhs, check_finite=False)


def _theta(x0, z, beta, lam, d):
    return 0.5 * np.dot(beta - x0, beta - x0) - np.dot(z - x0, beta) + np.dot(lam, d)


def pe_project_newton(x0, d, betabar, lam, tol, max_iter):
    """Semismooth Newton on the dual of the affine-box projection (PE family).

    Returns ``(beta, lam, iterations, residual_inf_norm)``.
    """
    n = d.shape[0]
    lam = lam.copy()
    mu = 1e-10
    it = 0
    z = x0 + pe_apply_t(n, lam)
    beta = np.clip(z, -betabar, betabar)
    r = d - pe_apply(n, beta)
    res = float(np.abs(r).max(initial=0.0))
    theta = _theta(x0, z, beta, lam, d)
    while res > tol and it < max_iter:
        free = (np.abs(z) < betabar).astype(float)
        step = _banded_solve(_pe_gdg_banded(n, free, mu), r)
        slope = float(r @ step)
        s = 1.0
        while True:
            lam_t = lam + s * step
            z_t = x0 + pe_apply_t(n, lam_t)
            beta_t = np.clip(z_t, -betabar, betabar)
            theta_t = _theta(x0, z_t, beta_t, lam_t, d)
            if theta_t >= theta + 1e-4 * s * slope or s < 1e-12:
                break
            s *= 0.5
        lam, z, beta, theta = lam_t, z_t, beta_t, theta_t
        r = d - pe_apply(n, beta)
        res = float(np.abs(r).max(initial=0.0))
        it += 1
        if s < 1e-12:
            break
    return beta, lam, it, res


def pe_dykstra(x0, d, betabar, tol, max_sweeps):
    """Dykstra's alternating projections between {G beta = d} and the box.

    Returns ``(beta, sweeps, residual_inf_norm)``.
    """
    n = d.shape[0]
    ab = np.zeros((2, n))
    if n > 1:
        ab[0, 1:] = -0.5
        ab[1] = 2.0
        ab[1, 0] = ab[1, -1] = 1.5
    else:
        ab[1] = 1.0
    x = x0.copy()
    p = np.zeros_like(x0)
    res = np.inf
    for sweep in range(1, max_sweeps + 1):
        y = x - pe_apply_t(n, _banded_solve(ab, pe_apply(n, x) - d))
        x_new = np.clip(y + p, -betabar, betabar)
        p = y + p - x_new
        res = float(np.abs(pe_apply(n, x_new) - d).max(initial=0.0))
        moved = float(np.abs(x_new - x).max(initial=0.0))
        x = x_new
        if res <= tol and moved <= tol:
            return x, sweep, res
    return x, max_sweeps, res
