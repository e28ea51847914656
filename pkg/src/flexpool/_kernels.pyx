# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_kernels_py`` function for function."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

cdef double SQRT_HALF = sqrt(0.5)


def aggregate_eval(const cnp.int64_t[::1] offsets, const double[::1] cum_len,
                   const double[::1] cum_int, const double[::1] slopes,
                   const double[::1] anchors, const double[::1] betabar,
                   const double[::1] beta):
    cdef Py_ssize_t g = betabar.shape[0]
    cdef Py_ssize_t i, a, b, lo, hi, mid, m
    cdef double total = 0.0, pos, prev_len, prev_int, q
    grad_arr = np.zeros(g)
    cdef double[::1] grad = grad_arr
    for i in range(g):
        a = offsets[i]
        b = offsets[i + 1]
        total += anchors[i]
        if b == a:
            continue
        pos = betabar[i] + beta[i]
        # bisect_right on cum_len[a:b]
        lo = a
        hi = b
        while lo < hi:
            mid = (lo + hi) >> 1
            if pos < cum_len[mid]:
                hi = mid
            else:
                lo = mid + 1
        m = lo - a
        if m > 0:
            prev_len = cum_len[a + m - 1]
            prev_int = cum_int[a + m - 1]
        else:
            prev_len = 0.0
            prev_int = 0.0
        if m < b - a:
            q = slopes[a + m]
        else:
            q = slopes[b - 1]
        total += prev_int + (pos - prev_len) * q
        grad[i] = q
    return total, grad_arr


def distribute_fill(const cnp.int64_t[::1] offsets, const double[::1] lengths,
                    const cnp.int64_t[::1] owners, const double[::1] positions,
                    Py_ssize_t n_systems):
    cdef Py_ssize_t g = positions.shape[0]
    cdef Py_ssize_t i, t
    cdef double remaining, take
    out_arr = np.zeros((n_systems, g))
    cdef double[:, ::1] out = out_arr
    for i in range(g):
        remaining = positions[i]
        for t in range(offsets[i], offsets[i + 1]):
            if remaining <= 0.0:
                break
            take = lengths[t] if lengths[t] < remaining else remaining
            out[owners[t], i] += take
            remaining -= take
    return out_arr


cdef void _apply(Py_ssize_t n, const double[::1] beta, double[::1] p) nogil:
    cdef Py_ssize_t k
    cdef double dv
    for k in range(n):
        p[k] = beta[k]
    for k in range(n - 1):
        dv = beta[n + k] * SQRT_HALF
        p[k] -= dv
        p[k + 1] += dv


cdef void _apply_t(Py_ssize_t n, const double[::1] lam, double[::1] out) nogil:
    cdef Py_ssize_t k
    for k in range(n):
        out[k] = lam[k]
    for k in range(n - 1):
        out[n + k] = (lam[k + 1] - lam[k]) * SQRT_HALF


cdef void _thomas(Py_ssize_t n, double[::1] diag, double[::1] off, double[::1] rhs,
                  double[::1] work, double[::1] sol) nogil:
    # symmetric tridiagonal solve; off[k] couples k and k+1
    cdef Py_ssize_t k
    cdef double denom
    denom = diag[0]
    sol[0] = rhs[0] / denom
    for k in range(1, n):
        work[k - 1] = off[k - 1] / denom
        denom = diag[k] - off[k - 1] * work[k - 1]
        sol[k] = (rhs[k] - off[k - 1] * sol[k - 1]) / denom
    for k in range(n - 2, -1, -1):
        sol[k] -= work[k] * sol[k + 1]


cdef double _clip_theta(Py_ssize_t g, const double[::1] x0, double[::1] z,
                        const double[::1] betabar, double[::1] beta) nogil:
    # clips z into beta, returns 0.5|beta-x0|^2 - (z-x0).beta
    cdef Py_ssize_t i
    cdef double acc = 0.0, bi, dx
    for i in range(g):
        bi = z[i]
        if bi > betabar[i]:
            bi = betabar[i]
        elif bi < -betabar[i]:
            bi = -betabar[i]
        beta[i] = bi
        dx = bi - x0[i]
        acc += 0.5 * dx * dx - (z[i] - x0[i]) * bi
    return acc


def pe_project_newton(const double[::1] x0, const double[::1] d, const double[::1] betabar,
                      const double[::1] lam_in, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t g = 2 * n - 1
    cdef Py_ssize_t k, i, it = 0
    cdef double mu = 1e-10, res, theta, theta_t, slope, s, ld

    lam_arr = np.array(lam_in, dtype=float, copy=True)
    beta_arr = np.empty(g)
    cdef double[::1] lam = lam_arr
    cdef double[::1] beta = beta_arr
    cdef double[::1] z = np.empty(g)
    cdef double[::1] zt = np.empty(g)
    cdef double[::1] beta_t = np.empty(g)
    cdef double[::1] lam_t = np.empty(n)
    cdef double[::1] r = np.empty(n)
    cdef double[::1] p = np.empty(n)
    cdef double[::1] diag = np.empty(n)
    cdef double[::1] off = np.empty(max(n - 1, 1))
    cdef double[::1] work = np.empty(max(n - 1, 1))
    cdef double[::1] step = np.empty(n)
    cdef double[::1] fr = np.empty(g)

    with nogil:
        _apply_t(n, lam, z)
        for i in range(g):
            z[i] += x0[i]
        theta = _clip_theta(g, x0, z, betabar, beta)
        ld = 0.0
        for k in range(n):
            ld += lam[k] * d[k]
        theta += ld
        _apply(n, beta, p)
        res = 0.0
        for k in range(n):
            r[k] = d[k] - p[k]
            if fabs(r[k]) > res:
                res = fabs(r[k])
        while res > tol and it < max_iter:
            for i in range(g):
                fr[i] = 1.0 if fabs(z[i]) < betabar[i] else 0.0
            for k in range(n):
                diag[k] = fr[k] + mu
            for k in range(n - 1):
                diag[k] += 0.5 * fr[n + k]
                diag[k + 1] += 0.5 * fr[n + k]
                off[k] = -0.5 * fr[n + k]
            _thomas(n, diag, off, r, work, step)
            slope = 0.0
            for k in range(n):
                slope += r[k] * step[k]
            s = 1.0
            while True:
                for k in range(n):
                    lam_t[k] = lam[k] + s * step[k]
                _apply_t(n, lam_t, zt)
                for i in range(g):
                    zt[i] += x0[i]
                theta_t = _clip_theta(g, x0, zt, betabar, beta_t)
                ld = 0.0
                for k in range(n):
                    ld += lam_t[k] * d[k]
                theta_t += ld
                if theta_t >= theta + 1e-4 * s * slope or s < 1e-12:
                    break
                s *= 0.5
            for k in range(n):
                lam[k] = lam_t[k]
            for i in range(g):
                z[i] = zt[i]
                beta[i] = beta_t[i]
            theta = theta_t
            _apply(n, beta, p)
            res = 0.0
            for k in range(n):
                r[k] = d[k] - p[k]
                if fabs(r[k]) > res:
                    res = fabs(r[k])
            it += 1
            if s < 1e-12:
                break
    return beta_arr, lam_arr, it, res


def pe_dykstra(const double[::1] x0, const double[::1] d, const double[::1] betabar,
               double tol, Py_ssize_t max_sweeps):
    cdef Py_ssize_t n = d.shape[0]
    cdef Py_ssize_t g = 2 * n - 1
    cdef Py_ssize_t k, i, sweep
    cdef double res = 1e300, moved, v
    x_arr = np.array(x0, dtype=float, copy=True)
    cdef double[::1] x = x_arr
    cdef double[::1] pc = np.zeros(g)
    cdef double[::1] y = np.empty(g)
    cdef double[::1] corr = np.empty(g)
    cdef double[::1] pv = np.empty(n)
    cdef double[::1] sol = np.empty(n)
    cdef double[::1] diag = np.empty(n)
    cdef double[::1] off = np.empty(max(n - 1, 1))
    cdef double[::1] work = np.empty(max(n - 1, 1))
    if n == 1:
        diag[0] = 1.0
    else:
        for k in range(n):
            diag[k] = 2.0
            if k < n - 1:
                off[k] = -0.5
        diag[0] = 1.5
        diag[n - 1] = 1.5
    with nogil:
        for sweep in range(1, max_sweeps + 1):
            _apply(n, x, pv)
            for k in range(n):
                pv[k] -= d[k]
            _thomas(n, diag, off, pv, work, sol)
            _apply_t(n, sol, corr)
            moved = 0.0
            for i in range(g):
                y[i] = x[i] - corr[i]
                v = y[i] + pc[i]
                if v > betabar[i]:
                    v = betabar[i]
                elif v < -betabar[i]:
                    v = -betabar[i]
                pc[i] = y[i] + pc[i] - v
                if fabs(v - x[i]) > moved:
                    moved = fabs(v - x[i])
                x[i] = v
            _apply(n, x, pv)
            res = 0.0
            for k in range(n):
                if fabs(pv[k] - d[k]) > res:
                    res = fabs(pv[k] - d[k])
            if res <= tol and moved <= tol:
                break
    return x_arr, min(sweep, max_sweeps), res
