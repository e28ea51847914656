"""Piecewise-linear convex costs in generator coordinates and their aggregate.

A system's total cost is its flexibility cost minus what it pays for energy.
Both are written per generator coordinate ``beta_i`` on ``[-betabar_i,
betabar_i]`` as a list of segments ``(length, slope)`` with ascending slopes
plus the value at the left end.

Aggregating ``J`` systems means, per generator, concatenating all segments
and sorting them by slope. Walking the merged list from the left gives the
cheapest way to split an aggregate coordinate among the systems, so the merged
function is the infimal convolution of the per-system functions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import BetaOutOfRange, DimensionMismatch, NonConvexInput
from .zonotope import Zonotope

TOL_LEN = 1e-9


@dataclass(frozen=True, eq=False)
class PwlComponent:
    """Convex piecewise-linear function on ``[-betabar, betabar]``."""

    lengths: np.ndarray
    slopes: np.ndarray
    left_value: float

    def __post_init__(self):
        l = np.atleast_1d(np.asarray(self.lengths, dtype=float)).ravel()
        q = np.atleast_1d(np.asarray(self.slopes, dtype=float)).ravel()
        if l.size != q.size:
            raise DimensionMismatch("lengths and slopes must have equal size")
        if np.any(l < 0) or not np.all(np.isfinite(l)) or not np.all(np.isfinite(q)):
            raise ValueError("segment lengths must be finite and non-negative")
        keep = l > 0
        l, q = l[keep], q[keep]
        if np.any(np.diff(q) < 0):
            raise NonConvexInput("segment slopes must be non-decreasing")
        object.__setattr__(self, "lengths", l)
        object.__setattr__(self, "slopes", q)
        object.__setattr__(self, "left_value", float(self.left_value))

    @property
    def betabar(self) -> float:
        return 0.5 * float(self.lengths.sum())

    def __call__(self, x: float) -> float:
        pos = float(x) + self.betabar
        ends = np.cumsum(self.lengths)
        starts = ends - self.lengths
        used = np.clip(pos - starts, 0.0, self.lengths)
        return self.left_value + float(used @ self.slopes)

    def restrict(self, half: float) -> "PwlComponent":
        """The same function on the narrower domain ``[-half, half]``."""
        bb = self.betabar
        if half < 0 or half > bb + TOL_LEN * max(1.0, bb):
            raise BetaOutOfRange("restriction must lie inside the domain")
        half = min(half, bb)
        cut = bb - half
        ends = np.cumsum(self.lengths)
        starts = ends - self.lengths
        lo_cut = np.clip(cut - starts, 0.0, self.lengths)
        hi_cut = np.clip(ends - (bb + half), 0.0, self.lengths)
        left = self.left_value + float(lo_cut @ self.slopes)
        return PwlComponent(self.lengths - lo_cut - hi_cut, self.slopes, left)

    def __eq__(self, other):
        if not isinstance(other, PwlComponent):
            return NotImplemented
        return (np.array_equal(self.lengths, other.lengths) and np.array_equal(self.slopes, other.slopes)
                and self.left_value == other.left_value)

    __hash__ = None

    def to_dict(self):
        return {"lengths": self.lengths.tolist(), "slopes": self.slopes.tolist(),
                "left_value": self.left_value}

    @classmethod
    def from_dict(cls, d):
        return cls(d["lengths"], d["slopes"], d["left_value"])


def linear_component(slope: float, betabar: float) -> PwlComponent:
    """``slope * beta`` on ``[-betabar, betabar]`` as a single segment."""
    return PwlComponent([2.0 * betabar], [slope], -slope * betabar)


def linear_flex_cost(slopes, betabar) -> list[PwlComponent]:
    return [linear_component(s, b) for s, b in zip(np.asarray(slopes, float), np.asarray(betabar, float))]


def zero_flex_cost(betabar) -> list[PwlComponent]:
    return linear_flex_cost(np.zeros(len(betabar)), betabar)


@dataclass(frozen=True)
class SystemCost:
    """Per-generator total cost components and the constant ``t_fix``."""

    components: tuple
    t_fix: float

    @property
    def n_generators(self) -> int:
        return len(self.components)

    @property
    def betabar(self) -> np.ndarray:
        return np.array([c.betabar for c in self.components])

    def __call__(self, beta) -> float:
        beta = np.asarray(beta, dtype=float).ravel()
        return self.t_fix + sum(c(b) for c, b in zip(self.components, beta))

    def restrict(self, half) -> "SystemCost":
        return SystemCost(tuple(c.restrict(h) for c, h in zip(self.components, half)), self.t_fix)


def build_system_cost(flex, v, Z: Zonotope, t_s: float) -> SystemCost:
    """Fold the energy payment ``t_s v.T (c + G beta)`` into the flexibility cost.

    Component ``i`` keeps its breakpoints; its slopes shift by
    ``-t_s v.T g_i``. The constant part becomes ``t_fix = -t_s v.T c``.
    """
    flex = list(flex)
    if len(flex) != Z.n_generators:
        raise DimensionMismatch(f"{len(flex)} cost components for {Z.n_generators} generators")
    v = np.asarray(v, dtype=float).ravel()
    if v.size != Z.N:
        raise DimensionMismatch(f"price vector has {v.size} entries, expected {Z.N}")
    shift = t_s * (Z.G.T @ v)
    comps = []
    for i, comp in enumerate(flex):
        if not isinstance(comp, PwlComponent):
            comp = PwlComponent(**comp) if isinstance(comp, dict) else PwlComponent(*comp)
        bb = Z.betabar[i]
        if abs(comp.betabar - bb) > TOL_LEN * max(1.0, bb):
            raise DimensionMismatch(f"component {i} spans {2 * comp.betabar}, expected {2 * bb}")
        comps.append(PwlComponent(comp.lengths, comp.slopes - shift[i], comp.left_value + shift[i] * bb))
    return SystemCost(tuple(comps), float(-t_s * v @ Z.center))


@dataclass(frozen=True, eq=False)
class AggregateCost:
    """Merged per-generator segment lists in flat arrays.

    Segments of generator ``i`` occupy ``offsets[i]:offsets[i+1]``.
    ``cum_len`` and ``cum_int`` are running sums of lengths and of
    ``length * slope`` restarted at each generator; ``owners`` and
    ``seg_index`` record which system and which of its segments each merged
    segment came from; ``anchors[i]`` is the sum of the members' values at
    their left ends.
    """

    offsets: np.ndarray
    lengths: np.ndarray
    slopes: np.ndarray
    owners: np.ndarray
    seg_index: np.ndarray
    cum_len: np.ndarray
    cum_int: np.ndarray
    anchors: np.ndarray
    betabar: np.ndarray
    t_fix: float
    n_systems: int

    @property
    def n_generators(self) -> int:
        return self.betabar.size

    def segments(self, i: int):
        """``(lengths, slopes, owners)`` of generator ``i``."""
        a, b = self.offsets[i], self.offsets[i + 1]
        return self.lengths[a:b], self.slopes[a:b], self.owners[a:b]


def merge_aggregate_cost(costs) -> AggregateCost:
    """Slope-sorted merge of same-size system costs.

    Ties are broken by system index, then by the segment's position within its
    system, so the result is deterministic.
    """
    costs = list(costs)
    if not costs:
        raise ValueError("need at least one system cost")
    g = costs[0].n_generators
    if any(c.n_generators != g for c in costs):
        raise DimensionMismatch("all system costs must have the same number of generators")
    gen, sysid, segid, lens, slopes = [], [], [], [], []
    anchors = np.zeros(g)
    betabar = np.zeros(g)
    t_fix = 0.0
    for j, cost in enumerate(costs):
        t_fix += cost.t_fix
        for i, comp in enumerate(cost.components):
            m = comp.lengths.size
            anchors[i] += comp.left_value
            betabar[i] += comp.betabar
            if m == 0:
                continue
            gen.append(np.full(m, i, dtype=np.int64))
            sysid.append(np.full(m, j, dtype=np.int64))
            segid.append(np.arange(m, dtype=np.int64))
            lens.append(comp.lengths)
            slopes.append(comp.slopes)
    return _assemble(g, len(costs), gen, sysid, segid, lens, slopes, anchors, betabar, t_fix)


def _assemble(g, n_systems, gen, sysid, segid, lens, slopes, anchors, betabar, t_fix):
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt) if xs else np.zeros(0, dt))
    gen, sysid, segid = cat(gen, np.int64), cat(sysid, np.int64), cat(segid, np.int64)
    lens, slopes = cat(lens, float), cat(slopes, float)
    order = np.lexsort((segid, sysid, slopes, gen))
    gen, sysid, segid = gen[order], sysid[order], segid[order]
    lens, slopes = lens[order], slopes[order]
    offsets = np.zeros(g + 1, dtype=np.int64)
    offsets[1:] = np.cumsum(np.bincount(gen, minlength=g))
    cum_len = np.cumsum(lens)
    cum_int = np.cumsum(lens * slopes)
    # restart the running sums at every generator boundary
    starts = offsets[:-1]
    nonempty = offsets[1:] > starts
    base_len = np.zeros(g)
    base_int = np.zeros(g)
    prev = starts[nonempty] - 1
    has_prev = prev >= 0
    base_len[np.flatnonzero(nonempty)[has_prev]] = cum_len[prev[has_prev]]
    base_int[np.flatnonzero(nonempty)[has_prev]] = cum_int[prev[has_prev]]
    counts = np.diff(offsets)
    cum_len -= np.repeat(base_len, counts)
    cum_int -= np.repeat(base_int, counts)
    return AggregateCost(offsets, lens, slopes, sysid, segid, cum_len, cum_int,
                         anchors, betabar, float(t_fix), int(n_systems))


def merge_linear_costs(slopes, betabars, t_fix=None) -> AggregateCost:
    """Fast merge for single-segment (linear) components.

    ``slopes`` and ``betabars`` are ``(J, g)`` arrays. Equivalent to
    :func:`merge_aggregate_cost` on :func:`linear_flex_cost` inputs, without
    building per-component objects.
    """
    slopes = np.asarray(slopes, dtype=float)
    betabars = np.asarray(betabars, dtype=float)
    J, g = slopes.shape
    anchors = -(slopes * betabars).sum(axis=0)
    keep = betabars > 0
    jj, ii = np.nonzero(keep)
    tf = 0.0 if t_fix is None else float(np.sum(t_fix))
    return _assemble(g, J, [ii], [jj], [np.zeros(ii.size, np.int64)],
                     [2.0 * betabars[keep]], [slopes[keep]], anchors, betabars.sum(axis=0), tf)


def _check_beta(ac: AggregateCost, beta) -> np.ndarray:
    beta = np.ascontiguousarray(beta, dtype=float).ravel()
    if beta.size != ac.n_generators:
        raise DimensionMismatch(f"beta has {beta.size} entries, expected {ac.n_generators}")
    tol = 1e-7 * np.maximum(1.0, ac.betabar)
    if np.any(np.abs(beta) > ac.betabar + tol):
        raise BetaOutOfRange("beta exceeds the aggregate bounds")
    return beta


def eval_with_subgradient(ac: AggregateCost, beta):
    """``(T_agg(beta), subgradient)``; the value includes anchors and ``t_fix``."""
    beta = _check_beta(ac, beta)
    total, grad = kernels.aggregate_eval(ac.offsets, ac.cum_len, ac.cum_int, ac.slopes,
                                         ac.anchors, ac.betabar, beta)
    return ac.t_fix + total, grad


def eval_aggregate(ac: AggregateCost, beta) -> float:
    return eval_with_subgradient(ac, beta)[0]


def subgradient_at(ac: AggregateCost, beta) -> np.ndarray:
    """Right slope at ``beta`` per generator, clamped to the last segment."""
    return eval_with_subgradient(ac, beta)[1]


def cost_to_dict(flex, prices) -> dict:
    return {"components": [c.to_dict() for c in flex], "prices": [float(v) for v in prices]}


def cost_from_dict(d):
    """``(flex components, prices)`` from the JSON layout of :func:`cost_to_dict`."""
    return [PwlComponent.from_dict(c) for c in d["components"]], np.asarray(d["prices"], dtype=float)
