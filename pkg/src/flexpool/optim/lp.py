"""Dense bounded-variable revised simplex.

Problems are stated as::

    minimize    cost @ x
    subject to  a_in @ x <= b_in
                a_eq @ x == b_eq
                lower <= x <= upper

Inequality rows receive slack columns, rows that the starting point does
not satisfy receive artificial columns, and a two-phase method is run on
the resulting equality form. Nonbasic variables sit at one of their bounds
(free variables at zero). The basis inverse is kept explicitly, updated by
elementary row operations after each pivot and refactorized periodically.
Pricing is Dantzig's rule; after a run of degenerate pivots it falls back
to Bland's rule until the objective moves again.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from ..errors import NumericalFailure

TOL_FEAS = 1e-8
TOL_OPT = 1e-7

_REFACTOR_EVERY = 50
_DEGENERATE_SWITCH = 30


class LpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass
class LinearProgram:
    """A linear program in inequality/equality/bounds form.

    Bounds default to free variables. ``None`` means "no rows" for the
    constraint blocks.
    """

    cost: np.ndarray
    a_in: np.ndarray | None = None
    b_in: np.ndarray | None = None
    a_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None

    def __post_init__(self):
        self.cost = np.asarray(self.cost, dtype=float).ravel()
        n = self.cost.size
        self.a_in, self.b_in = _block(self.a_in, self.b_in, n, "inequality")
        self.a_eq, self.b_eq = _block(self.a_eq, self.b_eq, n, "equality")
        self.lower = np.full(n, -np.inf) if self.lower is None else np.asarray(self.lower, float).ravel()
        self.upper = np.full(n, np.inf) if self.upper is None else np.asarray(self.upper, float).ravel()
        if self.lower.size != n or self.upper.size != n:
            raise ValueError("bounds must have one entry per variable")
        for arr in (self.cost, self.a_in, self.b_in, self.a_eq, self.b_eq):
            if not np.all(np.isfinite(arr)):
                raise ValueError("cost and constraint data must be finite")

    @property
    def n(self) -> int:
        return self.cost.size


def _block(a, b, n, name):
    if a is None:
        return np.zeros((0, n)), np.zeros(0)
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if a.shape[0] == 0:
        return np.zeros((0, n)), np.zeros(0)
    if a.shape[1] != n:
        raise ValueError(f"{name} matrix has {a.shape[1]} columns, expected {n}")
    if a.shape[0] != b.size:
        raise ValueError(f"{name} block: {a.shape[0]} rows but {b.size} right-hand sides")
    return a, b


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray
    objective: float
    y_in: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    reduced: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Simplex:
    def __init__(self, lp: LinearProgram, max_iter: int | None):
        n = lp.n
        m_in, m_eq = lp.a_in.shape[0], lp.a_eq.shape[0]
        self.n, self.m_in, self.m_eq = n, m_in, m_eq
        m = m_in + m_eq
        self.m = m

        # row equilibration; duals are unscaled on the way out
        a = np.vstack([lp.a_in, lp.a_eq])
        b = np.concatenate([lp.b_in, lp.b_eq])
        scale = np.abs(a).max(axis=1, initial=0.0) if m else np.zeros(0)
        scale[scale == 0.0] = 1.0
        a = a / scale[:, None]
        b = b / scale
        self.row_scale = scale

        x0 = np.where(np.isfinite(lp.lower), lp.lower, np.where(np.isfinite(lp.upper), lp.upper, 0.0))
        resid = b - a @ x0

        need_art = np.ones(m, dtype=bool)
        need_art[:m_in] = resid[:m_in] < 0.0
        art_rows = np.flatnonzero(need_art)
        n_art = art_rows.size
        signs = np.where(resid[art_rows] >= 0.0, 1.0, -1.0)

        ntot = n + m_in + n_art
        mat = np.zeros((m, ntot))
        mat[:, :n] = a
        mat[np.arange(m_in), n + np.arange(m_in)] = 1.0
        mat[art_rows, n + m_in + np.arange(n_art)] = signs
        self.mat = mat
        self.b = b

        self.lo = np.concatenate([lp.lower, np.zeros(m_in + n_art)])
        self.hi = np.concatenate([lp.upper, np.full(m_in + n_art, np.inf)])
        self.cost2 = np.concatenate([lp.cost, np.zeros(m_in + n_art)])
        self.cost1 = np.zeros(ntot)
        self.cost1[n + m_in:] = 1.0
        self.art0 = n + m_in
        self.n_art = n_art

        x = np.zeros(ntot)
        x[:n] = x0
        basis = np.empty(m, dtype=np.int64)
        slack_rows = np.flatnonzero(~need_art)
        basis[slack_rows] = n + slack_rows
        x[n + slack_rows] = resid[slack_rows]
        basis[art_rows] = n + m_in + np.arange(n_art)
        x[n + m_in:] = np.abs(resid[art_rows])
        self.x = x
        self.basis = basis
        self.is_basic = np.zeros(ntot, dtype=bool)
        self.is_basic[basis] = True
        # sign convention for nonbasic: +1 at lower, -1 at upper, 0 free at zero
        self.binv = np.diag(1.0 / mat[np.arange(m), basis]) if m else np.zeros((0, 0))
        self.iterations = 0
        self.max_iter = max_iter if max_iter is not None else 50 * (m + ntot) + 1000
        self.since_refactor = 0

    # -- linear algebra -------------------------------------------------
    def refactor(self):
        if self.m == 0:
            return
        bmat = self.mat[:, self.basis]
        try:
            self.binv = np.linalg.inv(bmat)
        except np.linalg.LinAlgError as exc:
            raise NumericalFailure("singular basis during refactorization") from exc
        nb = ~self.is_basic
        rhs = self.b - self.mat[:, nb] @ self.x[nb]
        self.x[self.basis] = self.binv @ rhs
        self.since_refactor = 0

    def run(self, cost: np.ndarray) -> str:
        mat, lo, hi = self.mat, self.lo, self.hi
        cscale = max(1.0, float(np.abs(cost).max(initial=0.0)))
        tol_d = 1e-9 * cscale
        fixed = lo == hi
        degenerate = 0
        bland = False
        while True:
            if self.iterations >= self.max_iter:
                raise NumericalFailure(f"simplex iteration limit ({self.max_iter}) reached")
            if self.since_refactor >= _REFACTOR_EVERY:
                self.refactor()
            y = cost[self.basis] @ self.binv if self.m else np.zeros(0)
            d = cost - y @ mat
            x = self.x
            at_lo = np.isfinite(lo) & (x <= lo)
            at_hi = np.isfinite(hi) & (x >= hi) & ~at_lo
            free = ~at_lo & ~at_hi
            elig_up = (at_lo | free) & (d < -tol_d)
            elig_dn = (at_hi | free) & (d > tol_d)
            elig = (elig_up | elig_dn) & ~self.is_basic & ~fixed
            cand = np.flatnonzero(elig)
            if cand.size == 0:
                return "optimal"
            if bland:
                j = int(cand[0])
            else:
                j = int(cand[np.argmax(np.abs(d[cand]))])
            sigma = 1.0 if elig_up[j] else -1.0

            w = self.binv @ mat[:, j] if self.m else np.zeros(0)
            change = -sigma * w
            xb = x[self.basis]
            lob, hib = lo[self.basis], hi[self.basis]
            piv_tol = 1e-11 * max(1.0, float(np.abs(w).max(initial=0.0)))
            t = np.full(self.m, np.inf)
            dec = change < -piv_tol
            inc = change > piv_tol
            with np.errstate(invalid="ignore", divide="ignore"):
                t[dec] = (xb[dec] - lob[dec]) / -change[dec]
                t[inc] = (hib[inc] - xb[inc]) / change[inc]
            t = np.where(np.isnan(t), np.inf, np.maximum(t, 0.0))
            tmin = float(t.min(initial=np.inf))
            t_flip = hi[j] - lo[j]

            if t_flip <= tmin:
                if not np.isfinite(t_flip):
                    return "unbounded"
                x[j] = hi[j] if sigma > 0 else lo[j]
                x[self.basis] = xb + change * t_flip
                self.iterations += 1
                degenerate = 0
                bland = False
                continue
            if not np.isfinite(tmin):
                return "unbounded"

            ties = np.flatnonzero(t <= tmin + 1e-12 * max(1.0, tmin))
            if bland:
                p = int(ties[np.argmin(self.basis[ties])])
            else:
                p = int(ties[np.argmax(np.abs(w[ties]))])
            step = t[p]
            leaving = int(self.basis[p])
            x[self.basis] = xb + change * step
            x[j] = x[j] + sigma * step
            x[leaving] = lob[p] if change[p] < 0 else hib[p]
            self.is_basic[leaving] = False
            self.is_basic[j] = True
            self.basis[p] = j

            piv = w[p]
            row = self.binv[p] / piv
            self.binv -= np.outer(w, row)
            self.binv[p] = row
            self.since_refactor += 1
            self.iterations += 1

            if step <= 1e-12:
                degenerate += 1
                if degenerate >= _DEGENERATE_SWITCH:
                    bland = True
            else:
                degenerate = 0
                bland = False

    def solve(self) -> LpSolution:
        n = self.n
        if np.any(self.lo[:n] > self.hi[:n]):
            return self._fail(LpStatus.INFEASIBLE)
        if self.n_art:
            self.run(self.cost1)
            self.refactor()
            infeas = float(self.x[self.art0:].sum())
            if infeas > TOL_FEAS * max(1.0, float(np.abs(self.b).max(initial=0.0))):
                return self._fail(LpStatus.INFEASIBLE)
            self.hi[self.art0:] = 0.0
            self.x[self.art0:] = np.where(self.is_basic[self.art0:], self.x[self.art0:], 0.0)
        status = self.run(self.cost2)
        if status == "unbounded":
            return self._fail(LpStatus.UNBOUNDED)
        self.refactor()
        x = self.x[:n].copy()
        x = np.clip(x, self.lo[:n], self.hi[:n])
        y = self.cost2[self.basis] @ self.binv if self.m else np.zeros(0)
        reduced = self.cost2[:n] - y @ self.mat[:, :n]
        y = y / self.row_scale
        return LpSolution(
            LpStatus.OPTIMAL,
            x,
            float(self.cost2[:n] @ x),
            y_in=y[: self.m_in],
            y_eq=y[self.m_in:],
            reduced=reduced,
            iterations=self.iterations,
        )

    def _fail(self, status):
        return LpSolution(status, np.full(self.n, np.nan), np.nan, iterations=self.iterations)


def solve_lp(lp: LinearProgram, *, backend: str = "simplex", max_iter: int | None = None) -> LpSolution:
    """Solve ``lp`` and return an :class:`LpSolution`.

    ``backend="simplex"`` (default) uses the in-repo revised simplex.
    ``backend="highs"`` delegates to :func:`scipy.optimize.linprog`, which is
    useful for large oracle instances.

    Raises :class:`NumericalFailure` when the iteration cap is hit or a basis
    becomes singular; infeasibility and unboundedness are reported through
    ``status`` instead.
    """
    if backend == "simplex":
        return _Simplex(lp, max_iter).solve()
    if backend == "highs":
        return _solve_highs(lp)
    raise ValueError(f"unknown LP backend {backend!r}")


def _solve_highs(lp: LinearProgram) -> LpSolution:
    from scipy.optimize import linprog

    res = linprog(
        lp.cost,
        A_ub=lp.a_in if lp.a_in.shape[0] else None,
        b_ub=lp.b_in if lp.a_in.shape[0] else None,
        A_eq=lp.a_eq if lp.a_eq.shape[0] else None,
        b_eq=lp.b_eq if lp.a_eq.shape[0] else None,
        bounds=np.column_stack([lp.lower, lp.upper]),
        method="highs",
    )
    if res.status == 2:
        return LpSolution(LpStatus.INFEASIBLE, np.full(lp.n, np.nan), np.nan)
    if res.status == 3:
        return LpSolution(LpStatus.UNBOUNDED, np.full(lp.n, np.nan), np.nan)
    if res.status != 0:
        raise NumericalFailure(f"HiGHS failed: {res.message}")
    y_in = res.ineqlin.marginals if lp.a_in.shape[0] else np.zeros(0)
    y_eq = res.eqlin.marginals if lp.a_eq.shape[0] else np.zeros(0)
    reduced = lp.cost - lp.a_in.T @ y_in - lp.a_eq.T @ y_eq
    return LpSolution(LpStatus.OPTIMAL, res.x, float(res.fun), y_in, y_eq, reduced, int(res.nit))
