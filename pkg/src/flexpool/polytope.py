"""Resource polytopes ``{p : A p <= b}`` built from device constraints.

Power trajectories ``p`` are length-``N`` vectors of constant power per step
(kW, positive = consumption). Supported constraint types are per-step power
bounds, cumulative energy bounds, ramp-rate bounds and linear state dynamics.
Rows whose right-hand side is infinite are dropped at construction, and every
constructor runs one LP feasibility probe so that empty sets are rejected
eagerly.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, EmptyPolytope, UnboundedError
from .optim import LinearProgram, LpStatus, solve_lp

TOL_FEAS = 1e-8


def _vec(x, n, name):
    a = np.asarray(x, dtype=float)
    if a.ndim == 0:
        a = np.full(n, float(a))
    a = a.ravel()
    if a.size != n:
        raise DimensionMismatch(f"{name} has {a.size} entries, expected {n}")
    return a


@dataclass(frozen=True)
class PeParams:
    """Power and cumulative-energy bounds of a PE-system.

    Scalars are broadcast to length ``N``. Energies are in kWh, powers in kW,
    ``t_s`` in hours.
    """

    N: int
    t_s: float
    p_lo: np.ndarray
    p_hi: np.ndarray
    e_lo: np.ndarray
    e_hi: np.ndarray
    e0: float

    def __post_init__(self):
        n = int(self.N)
        if n < 1:
            raise ValueError("N must be at least 1")
        if not self.t_s > 0:
            raise ValueError("t_s must be positive")
        object.__setattr__(self, "N", n)
        for name in ("p_lo", "p_hi", "e_lo", "e_hi"):
            object.__setattr__(self, name, _vec(getattr(self, name), n, name))
        if np.any(self.p_lo > self.p_hi):
            raise ValueError("p_lo must not exceed p_hi")
        if np.any(self.e_lo > self.e_hi):
            raise ValueError("e_lo must not exceed e_hi")
        object.__setattr__(self, "e0", float(self.e0))

    def to_dict(self):
        return {
            "N": self.N, "t_s": self.t_s, "e0": self.e0,
            **{k: [float(v) for v in getattr(self, k)] for k in ("p_lo", "p_hi", "e_lo", "e_hi")},
        }

    @classmethod
    def from_dict(cls, d):
        return cls(d["N"], d["t_s"], d["p_lo"], d["p_hi"], d["e_lo"], d["e_hi"], d["e0"])


@dataclass(frozen=True)
class RampParams:
    """Ramp bounds in kW/h for steps ``k = 2..N`` (``N - 1`` entries each)."""

    r_lo: np.ndarray
    r_hi: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.r_lo, dtype=float)).ravel()
        hi = np.atleast_1d(np.asarray(self.r_hi, dtype=float)).ravel()
        if lo.size != hi.size:
            raise DimensionMismatch("r_lo and r_hi must have equal length")
        if np.any(lo > hi):
            raise ValueError("r_lo must not exceed r_hi")
        object.__setattr__(self, "r_lo", lo)
        object.__setattr__(self, "r_hi", hi)


@dataclass(frozen=True)
class StateModel:
    """Linear dynamics ``x_{k+1} = A_k x_k + B_k u_k + C_k p_k`` with bounds on ``x_{k+1}``.

    Per-step arrays are stacked along the first axis: ``A`` is ``(K, nx, nx)``,
    ``B`` is ``(K, nx, nu)``, ``C`` is ``(K, nx)``, ``u`` is ``(K, nu)`` and
    ``x_lo``/``x_hi`` are ``(K, nx)``. ``K`` is ``N - 1``, or ``N`` when the
    last step's successor state is also bounded.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    u: np.ndarray
    x1: np.ndarray
    x_lo: np.ndarray
    x_hi: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise DimensionMismatch("A must be (K, nx, nx)")
        k, nx = A.shape[0], A.shape[1]
        C = np.asarray(self.C, dtype=float).reshape(k, nx)
        u = np.asarray(self.u, dtype=float).reshape(k, -1)
        B = np.asarray(self.B, dtype=float).reshape(k, nx, u.shape[1])
        x1 = np.asarray(self.x1, dtype=float).reshape(nx)
        x_lo = np.asarray(self.x_lo, dtype=float).reshape(k, nx)
        x_hi = np.asarray(self.x_hi, dtype=float).reshape(k, nx)
        if np.any(x_lo > x_hi):
            raise ValueError("x_lo must not exceed x_hi")
        for name, val in (("A", A), ("B", B), ("C", C), ("u", u), ("x1", x1), ("x_lo", x_lo), ("x_hi", x_hi)):
            object.__setattr__(self, name, val)

    @property
    def steps(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True, eq=False)
class HPolytope:
    A: np.ndarray
    b: np.ndarray
    N: int = field(default=-1)

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        b = np.asarray(self.b, dtype=float).ravel()
        n = A.shape[1] if self.N < 0 else int(self.N)
        if A.shape[0] == 0:
            A = np.zeros((0, n))
        if A.shape != (b.size, n):
            raise DimensionMismatch(f"A is {A.shape}, b has {b.size} rows, N={n}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise ValueError("polytope data must be finite")
        A.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "N", n)

    @property
    def n_rows(self) -> int:
        return self.b.size

    def to_dict(self):
        return {"A": self.A.tolist(), "b": self.b.tolist(), "N": self.N}

    @classmethod
    def from_dict(cls, d):
        return cls(np.asarray(d["A"], dtype=float).reshape(-1, d["N"]), d["b"], d["N"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _finite_rows(A, b):
    keep = np.isfinite(b)
    return A[keep], b[keep]


def _probe(P: HPolytope) -> HPolytope:
    sol = solve_lp(LinearProgram(np.zeros(P.N), P.A, P.b))
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytope("constraints admit no power trajectory")
    return P


def build_pe_polytope(params: PeParams) -> HPolytope:
    """Rows for power bounds then cumulative energy bounds (``4N`` rows at most).

    The ``k = N`` energy pair is kept even when it is implied by others.
    """
    n, ts = params.N, params.t_s
    eye = np.eye(n)
    cum = ts * np.tril(np.ones((n, n)))
    A = np.vstack([eye, -eye, cum, -cum])
    b = np.concatenate([params.p_hi, -params.p_lo, params.e_hi - params.e0, -(params.e_lo - params.e0)])
    A, b = _finite_rows(A, b)
    return _probe(HPolytope(A, b, n))


def add_ramp_constraints(P: HPolytope, ramp: RampParams, t_s: float) -> HPolytope:
    """Append ``r_lo <= (p_k - p_{k-1}) / t_s <= r_hi`` rows (infinite bounds skipped)."""
    n = P.N
    if ramp.r_lo.size != n - 1:
        raise DimensionMismatch(f"ramp needs {n - 1} bound pairs, got {ramp.r_lo.size}")
    D = np.zeros((n - 1, n))
    D[np.arange(n - 1), np.arange(1, n)] = 1.0
    D[np.arange(n - 1), np.arange(n - 1)] = -1.0
    A, b = _finite_rows(np.vstack([D, -D]), np.concatenate([t_s * ramp.r_hi, -t_s * ramp.r_lo]))
    if b.size == 0:
        return P
    return _probe(HPolytope(np.vstack([P.A, A]), np.concatenate([P.b, b]), n))


def state_rollout(model: StateModel, n: int):
    """Affine maps of the successor states: ``x_{k+1} = phi[k] + psi[k] @ p``."""
    k_steps = model.steps
    if k_steps not in (n - 1, n):
        raise DimensionMismatch(f"state model spans {k_steps} steps, expected {n - 1} or {n}")
    nx = model.A.shape[1]
    phi = np.zeros((k_steps, nx))
    psi = np.zeros((k_steps, nx, n))
    x_aff, x_lin = model.x1.copy(), np.zeros((nx, n))
    for k in range(k_steps):
        x_aff = model.A[k] @ x_aff + model.B[k] @ model.u[k]
        x_lin = model.A[k] @ x_lin
        x_lin[:, k] += model.C[k]
        phi[k], psi[k] = x_aff, x_lin
    return phi, psi


def add_state_constraints(P: HPolytope, model: StateModel) -> HPolytope:
    """Eliminate the states by forward rollout and append rows in ``p`` only."""
    phi, psi = state_rollout(model, P.N)
    M = psi.reshape(-1, P.N)
    hi = (model.x_hi - phi).ravel()
    lo = (model.x_lo - phi).ravel()
    A, b = _finite_rows(np.vstack([M, -M]), np.concatenate([hi, -lo]))
    if b.size == 0:
        return P
    return _probe(HPolytope(np.vstack([P.A, A]), np.concatenate([P.b, b]), P.N))


def contains(P: HPolytope, p) -> bool:
    p = np.asarray(p, dtype=float).ravel()
    if p.size != P.N:
        raise DimensionMismatch(f"point has {p.size} entries, polytope has N={P.N}")
    return bool(np.all(P.A @ p <= P.b + TOL_FEAS * (1.0 + np.abs(P.b))))


def _extreme(P: HPolytope, f: np.ndarray, sense: float) -> float:
    sol = solve_lp(LinearProgram(-sense * f, P.A, P.b))
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytope("polytope is empty")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedError("polytope is unbounded along the requested direction")
    return float(f @ sol.x)


def support_width(P: HPolytope, f) -> float:
    """``max f.p - min f.p`` over ``P``, by two LPs."""
    f = np.asarray(f, dtype=float).ravel()
    return max(0.0, _extreme(P, f, 1.0) - _extreme(P, f, -1.0))


def max_inscribed_cube(P: HPolytope):
    """Largest axis-aligned cube in ``P``: maximize ``r`` s.t. ``A c + |A| 1 r <= b``.

    Returns ``(center, half_edge)``.
    """
    n = P.N
    rowsum = np.abs(P.A).sum(axis=1, keepdims=True)
    cost = np.zeros(n + 1)
    cost[-1] = -1.0
    lower = np.full(n + 1, -np.inf)
    lower[-1] = 0.0
    sol = solve_lp(LinearProgram(cost, np.hstack([P.A, rowsum]), P.b, lower=lower))
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytope("polytope is empty")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedError("polytope is unbounded")
    return sol.x[:n], float(sol.x[-1])


def max_inscribed_box(P: HPolytope, cube):
    """Box of maximum cumulative edge length with ``cube ⊆ box ⊆ P``.

    Returns ``(lo, hi)``.
    """
    n = P.N
    center, half = cube
    center = np.asarray(center, dtype=float)
    a_pos, a_neg = np.maximum(P.A, 0.0), np.minimum(P.A, 0.0)
    # variables [lo, hi]
    cost = np.concatenate([np.ones(n), -np.ones(n)])
    # the cube comes from its own LP and may poke out of P by round-off;
    # shrink it by a matching margin instead of relaxing P
    tau = TOL_FEAS * (1.0 + np.abs(center) + half)
    upper = np.concatenate([center - half + tau, np.full(n, np.inf)])
    lower = np.concatenate([np.full(n, -np.inf), center + half - tau])
    sol = solve_lp(LinearProgram(cost, np.hstack([a_neg, a_pos]), P.b, lower=lower, upper=upper))
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytope("no box contains the cube inside the polytope")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedError("polytope is unbounded")
    return sol.x[:n], sol.x[n:]


def pe_window_extremes(params: PeParams):
    """Exact extremes of every window sum ``p_j + ... + p_k`` over a PE polytope.

    Cumulative sums ``S_k`` obey difference constraints, so
    ``max(S_k - S_j)`` is a shortest-path distance in the constraint graph.
    Returns ``(hi, lo)`` arrays of shape ``(N, N)`` where entry ``[j, k]``
    (``j <= k``, 0-based) bounds ``sum(p[j:k+1])``.

    Raises :class:`EmptyPolytope` on a negative cycle.
    """
    n, ts = params.N, params.t_s
    D = np.full((n + 1, n + 1), np.inf)
    np.fill_diagonal(D, 0.0)
    k = np.arange(1, n + 1)
    # S_k - S_{k-1} <= p_hi ; S_{k-1} - S_k <= -p_lo   (edge b -> a for S_a - S_b <= w)
    D[k - 1, k] = np.minimum(D[k - 1, k], params.p_hi)
    D[k, k - 1] = np.minimum(D[k, k - 1], -params.p_lo)
    D[0, k] = np.minimum(D[0, k], (params.e_hi - params.e0) / ts)
    D[k, 0] = np.minimum(D[k, 0], -(params.e_lo - params.e0) / ts)
    for m in range(n + 1):
        D = np.minimum(D, D[:, m:m + 1] + D[m:m + 1, :])
    if np.any(np.diag(D) < -1e-9):
        raise EmptyPolytope("power and energy bounds are inconsistent")
    hi = D[:-1, 1:]          # hi[j, k] = max S_{k+1} - S_j
    lo = -D[1:, :-1].T       # lo[j, k] = -max(S_j - S_{k+1})
    return hi, lo
