"""Inner approximation of a resource polytope by a zonotope.

The fit maximizes a width-weighted sum of generator bounds subject to the
zonotope lying inside the polytope::

    maximize   w.T betabar
    subject to A c + |A G| betabar <= b,   betabar >= 0

with ``w = (2/q') sum_i |f_i.T G| / Delta_P,i`` over directions whose
polytope width exceeds ``weight_floor``. Maximizing ``w.T betabar`` is the
same as maximizing the mean width ratio ``Lambda`` below, which is linear in
``betabar``.

The optional degeneracy guard forces the axis-generator core box of the
zonotope to contain the largest-edge-sum box inside the polytope, so that a
polytope with positive width in every direction never yields a zonotope that
is flat in some direction.
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .errors import EmptyPolytope, NumericalFailure, UnboundedError
from .optim import LinearProgram, LpStatus, solve_lp
from .polytope import (HPolytope, PeParams, build_pe_polytope, max_inscribed_box,
                       max_inscribed_cube, pe_window_extremes, support_width)
from .zonotope import Zonotope, facet_normals, generators, is_inside_polytope, window_index


@dataclass(frozen=True)
class WidthProfile:
    deltas: np.ndarray
    F: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.deltas, dtype=float).ravel()
        if d.size != self.F.shape[1]:
            raise ValueError("one width per facet normal required")
        if not np.all(np.isfinite(d)) or np.any(d < 0):
            raise ValueError("widths must be finite and non-negative")
        object.__setattr__(self, "deltas", d)


@dataclass(frozen=True)
class FitOptions:
    guard_degeneracy: bool = True
    weight_floor: float = 1e-9

    def __post_init__(self):
        if not self.weight_floor > 0:
            raise ValueError("weight_floor must be positive")


def polytope_widths(P: HPolytope, F: np.ndarray | None = None) -> WidthProfile:
    """Width of ``P`` along every column of ``F`` (two LPs per direction)."""
    F = facet_normals(P.N) if F is None else F
    return WidthProfile(np.array([support_width(P, F[:, i]) for i in range(F.shape[1])]), F)


def pe_polytope_widths(params: PeParams) -> WidthProfile:
    """Exact widths of a PE polytope along all window normals without LPs."""
    n = params.N
    hi, lo = pe_window_extremes(params)
    idx = window_index(n)
    j, k = idx[:, 0], idx[:, 1]
    deltas = (hi[j, k] - lo[j, k]) / np.sqrt(k - j + 1.0)
    return WidthProfile(np.maximum(deltas, 0.0), facet_normals(n))


def _retained(widths: WidthProfile, floor: float) -> np.ndarray:
    return widths.deltas > floor


def approximation_quality(Z: Zonotope, F: np.ndarray, widths: WidthProfile,
                          floor: float = 1e-9) -> float:
    """Mean of ``Delta_Z,i / Delta_P,i`` over directions wider than ``floor``.

    Returns 1.0 when no direction is retained (a point is matched exactly).
    """
    keep = _retained(widths, floor)
    if not np.any(keep):
        return 1.0
    dz = Z.widths(F)
    return float(np.mean(dz[keep] / widths.deltas[keep]))


def fit_weights(G: np.ndarray, F: np.ndarray, widths: WidthProfile, floor: float = 1e-9) -> np.ndarray:
    keep = _retained(widths, floor)
    if not np.any(keep):
        return np.zeros(G.shape[1])
    S = np.abs(F[:, keep].T @ G)
    return (2.0 / keep.sum()) * (S / widths.deltas[keep, None]).sum(axis=0)


def core_box(P: HPolytope):
    """``(lo, hi)`` of the largest-edge-sum box grown from the largest cube in ``P``."""
    return max_inscribed_box(P, max_inscribed_cube(P))


def _fit(P: HPolytope, family: str, w: np.ndarray, guard_box) -> Zonotope:
    n = P.N
    G = generators(family, n)
    g = G.shape[1]
    AG = np.abs(P.A @ G)
    a_in = [np.hstack([P.A, AG])]
    b_in = [P.b]
    if guard_box is not None:
        lo, hi = guard_box
        # the box comes from an LP of its own; give it round-off room
        slack = 1e-9 * (1.0 + np.maximum(np.abs(lo), np.abs(hi)))
        lo, hi = np.minimum(lo + slack, hi), np.maximum(hi - slack, lo)
        eye = np.eye(n)
        axis = np.zeros((n, g))
        axis[:, :n] = eye
        # c - betabar_axis <= lo ;  -c - betabar_axis <= -hi
        a_in += [np.hstack([eye, -axis]), np.hstack([-eye, -axis])]
        b_in += [lo, -hi]
    cost = np.concatenate([np.zeros(n), -w])
    lower = np.concatenate([np.full(n, -np.inf), np.zeros(g)])
    sol = solve_lp(LinearProgram(cost, np.vstack(a_in), np.concatenate(b_in), lower=lower))
    if sol.status is LpStatus.INFEASIBLE:
        raise EmptyPolytope("no zonotope fits inside the polytope")
    if sol.status is LpStatus.UNBOUNDED:
        raise UnboundedError("polytope is unbounded")
    c, bb = sol.x[:n], np.maximum(sol.x[n:], 0.0)
    Z = Zonotope(family, c, bb)
    if not is_inside_polytope(Z, P):
        raise NumericalFailure("fitted zonotope violates polytope containment")
    return Z


def fit_zonotope(P: HPolytope, widths: WidthProfile | None = None,
                 opts: FitOptions = FitOptions(), family: str = "pe", guard_box=None) -> Zonotope:
    """Largest-weighted zonotope of ``family`` inside ``P``.

    ``guard_box`` may pass a precomputed ``(lo, hi)`` core box to skip its LPs.
    """
    F = facet_normals(P.N)
    if widths is None:
        widths = polytope_widths(P, F)
    w = fit_weights(generators(family, P.N), widths.F, widths, opts.weight_floor)
    if opts.guard_degeneracy and guard_box is None:
        guard_box = core_box(P)
    return _fit(P, family, w, guard_box if opts.guard_degeneracy else None)


def fit_box(P: HPolytope, widths: WidthProfile | None = None,
            opts: FitOptions = FitOptions(), guard_box=None) -> Zonotope:
    """Axis-aligned box fit; weights use only the axis widths of ``P``."""
    n = P.N
    if widths is None:
        axis = WidthProfile(np.array([support_width(P, e) for e in np.eye(n)]), np.eye(n))
    else:
        idx = window_index(n)
        on_axis = idx[:, 0] == idx[:, 1]
        axis = WidthProfile(widths.deltas[on_axis], np.eye(n))
    w = fit_weights(np.eye(n), np.eye(n), axis, opts.weight_floor)
    if opts.guard_degeneracy and guard_box is None:
        guard_box = core_box(P)
    return _fit(P, "box", w, guard_box if opts.guard_degeneracy else None)


@dataclass(frozen=True)
class SystemFit:
    zonotope: Zonotope
    box: Zonotope
    lambda_z: float
    lambda_b: float
    seconds: float


def fit_system(params: PeParams, opts: FitOptions = FitOptions()) -> SystemFit:
    """Fit a PE-system with both families and score each against the polytope."""
    t0 = time.perf_counter()
    P = build_pe_polytope(params)
    widths = pe_polytope_widths(params)
    guard = core_box(P) if opts.guard_degeneracy else None
    Z = fit_zonotope(P, widths, opts, guard_box=guard)
    B = fit_box(P, widths, opts, guard_box=guard)
    F = widths.F
    lz = approximation_quality(Z, F, widths, opts.weight_floor)
    lb = approximation_quality(B, F, widths, opts.weight_floor)
    return SystemFit(Z, B, lz, lb, time.perf_counter() - t0)


def box_as_pe(B: Zonotope) -> Zonotope:
    """Re-express a box zonotope in the PE family (axis bounds, zero differences)."""
    if B.family == "pe":
        return B
    n = B.N
    return Zonotope("pe", B.center, np.concatenate([B.betabar, np.zeros(max(n - 1, 0))]))


__all__ = [
    "WidthProfile", "FitOptions", "SystemFit", "polytope_widths", "pe_polytope_widths",
    "approximation_quality", "fit_weights", "core_box", "fit_zonotope", "fit_box",
    "fit_system", "box_as_pe",
]
