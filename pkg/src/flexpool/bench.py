"""Canned benchmark suites and the run report they produce.

Each suite takes a plain config dict, returns a :class:`SuiteResult` with
scalar metrics, plot-ready rows and a pass flag, and is deterministic given
its config. The CLI ``bench`` command and the acceptance tests both run
these functions.
"""
from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field

import numpy as np

from .costs import (SystemCost, build_system_cost, eval_aggregate, linear_flex_cost,
                    merge_aggregate_cost, merge_linear_costs, zero_flex_cost)
from .disagg import SubgradientParams, disaggregate, disaggregate_beta_lp, disaggregate_subgradient
from .errors import NumericalFailure
from .fleet import sample_fleet, sample_prices, system_rng
from .oracles import (facet_count, hull_vertices, infimal_convolution_lp, lp_membership,
                      zonotope_corners, zonotope_vertices)
from .polytope import build_pe_polytope
from .regulation import (baseline_cost_poly_oracle, baseline_cost_zono, max_capacity_poly,
                         max_capacity_zono)
from .zonofit import fit_system
from .zonotope import Zonotope, contains_point, minkowski_sum


@dataclass
class SuiteResult:
    name: str
    config: dict
    metrics: dict
    rows: list = field(default_factory=list)
    header: tuple = ()
    passed: bool = True
    seconds: float = 0.0


@dataclass
class RunReport:
    profile: str
    config: dict
    suites: list
    artifacts: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        return config_hash(self.config)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)

    def to_dict(self) -> dict:
        return {
            "profile": self.profile,
            "config": self.config,
            "config_hash": self.config_hash,
            "phases": {s.name: s.seconds for s in self.suites},
            "metrics": {s.name: s.metrics for s in self.suites},
            "passed": {s.name: s.passed for s in self.suites},
            "artifacts": self.artifacts,
        }

    def summary(self) -> str:
        lines = [f"profile {self.profile}  config {self.config_hash[:12]}"]
        for s in self.suites:
            status = "PASS" if s.passed else "FAIL"
            shown = ", ".join(f"{k}={_fmt(v)}" for k, v in s.metrics.items() if not isinstance(v, (list, dict)))
            lines.append(f"  [{status}] {s.name} ({s.seconds:.1f} s): {shown}")
        return "\n".join(lines)


def _fmt(v):
    return f"{v:.4g}" if isinstance(v, float) else str(v)


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def _timed(fn):
    def run(config=None):
        cfg = dict(DEFAULTS[fn.__name__[len("suite_"):]])
        cfg.update(config or {})
        t0 = time.perf_counter()
        res = fn(cfg)
        res.seconds = time.perf_counter() - t0
        return res
    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


DEFAULTS = {
    "lambda": {"count": 100, "N": 12, "t_s": 2.0, "seed": 0,
               "lambda_z": [0.55, 0.71], "lambda_b": [0.25, 0.37]},
    "gap": {"N": 24, "t_s": 1.0, "sizes": [10, 100, 1000], "seeds": 20, "seed": 0, "pool": 200,
            "cost_model": "beta-normal", "h": 5, "eps": 1e-3, "max_gap": 2.5e-3,
            "highs_from": 1000},
    "scaling": {"N": 96, "t_s": 0.25, "sizes": [1000, 10000], "pool": 10, "seed": 0,
                "repeats": 3, "max_ratio": 5.0},
    "minkowski": {"N": 2, "pairs": 50, "seed": 0, "tol": 1e-9},
    "membership": {"dims": [2, 3, 4], "zonotopes": 20, "points": 1000, "seed": 0},
    "facets": {"dims": [2, 3, 4], "seed": 0},
    "baseline": {"fleets": 10, "J": 10, "N": 6, "t_s": 4.0, "seed": 0,
                 "fractions": [0.0, 0.25, 0.5, 0.75], "tol": 1e-6},
    "infconv": {"J": 5, "g": 5, "seeds": 10, "points": 100, "tol": 1e-6},
}


def fitted_pool(count: int, N: int, t_s: float, seed: int):
    """Fitted zonotopes of ``count`` sampled vehicles (members are drawn from this pool)."""
    return [fit_system(p).zonotope for p in sample_fleet(count, N=N, t_s=t_s, seed=seed).params()]


# -- suites ---------------------------------------------------------------------

@_timed
def suite_lambda(cfg):
    """Approximation quality of the fitted zonotope and box on a sampled fleet."""
    scen = sample_fleet(cfg["count"], N=cfg["N"], t_s=cfg["t_s"], seed=cfg["seed"])
    rows = []
    for j, p in enumerate(scen.params()):
        f = fit_system(p)
        rows.append((j, f.lambda_z, f.lambda_b, f.seconds))
    lz = np.array([r[1] for r in rows])
    lb = np.array([r[2] for r in rows])
    m = {"mean_lambda_z": float(lz.mean()), "mean_lambda_b": float(lb.mean()),
         "min_lambda_z_minus_b": float((lz - lb).min()),
         "systems_z_below_b": int(np.sum(lz < lb))}
    ok = (cfg["lambda_z"][0] <= m["mean_lambda_z"] <= cfg["lambda_z"][1]
          and cfg["lambda_b"][0] <= m["mean_lambda_b"] <= cfg["lambda_b"][1]
          and m["systems_z_below_b"] == 0)
    return SuiteResult("lambda", cfg, m, rows, ("system_id", "lambda_z", "lambda_b", "fit_seconds"), ok)


def random_costs(model: str, rng, zs, t_s: float, systems: bool = True):
    """Random linear cost per member: ``(SystemCost list, AggregateCost)``.

    With ``systems=False`` the per-member list is skipped (``None``) where the
    merged cost can be built without it.

    ``beta-normal`` / ``beta-uniform`` draw slopes directly on the generator
    coordinates from N(0, 1) / U[-1, 1]; ``price-uniform`` draws a per-step
    price vector from U[0, 1] and pays ``-t_s phi.T p`` (a revenue).
    """
    J, g = len(zs), zs[0].n_generators
    B = np.array([z.betabar for z in zs])
    if model in ("beta-normal", "beta-uniform"):
        q = rng.standard_normal((J, g)) if model == "beta-normal" else rng.uniform(-1.0, 1.0, (J, g))
        costs = [SystemCost(tuple(linear_flex_cost(q[j], B[j])), 0.0) for j in range(J)] if systems else None
        return costs, merge_linear_costs(q, B)
    if model == "price-uniform":
        phi = rng.uniform(0.0, 1.0, (J, zs[0].N))
        costs = [build_system_cost(zero_flex_cost(B[j]), -phi[j], zs[j], t_s) for j in range(J)]
        return costs, merge_aggregate_cost(costs)
    raise ValueError(f"unknown cost model {model!r}")


def reachable_target(rng, zs, Zagg):
    """``p_agg`` realized by uniformly random member coordinates."""
    B = np.array([z.betabar for z in zs])
    beta = rng.uniform(-1.0, 1.0, B.shape) * B
    return Zagg.center + Zagg.G @ beta.sum(axis=0)


@_timed
def suite_gap(cfg):
    """Relative gap of the subgradient disaggregation against the exact LP."""
    pool = fitted_pool(cfg["pool"], cfg["N"], cfg["t_s"], cfg["seed"])
    params = SubgradientParams(h=cfg["h"], eps=cfg["eps"])
    rows = []
    violations = 0
    sum_err = 0.0
    for J in cfg["sizes"]:
        for s in range(cfg["seeds"]):
            rng = np.random.Generator(np.random.Philox(key=[cfg["seed"], (J << 32) | s]))
            zs = [pool[i] for i in rng.integers(0, len(pool), J)]
            costs, ac = random_costs(cfg["cost_model"], rng, zs, cfg["t_s"])
            Zagg = minkowski_sum(zs)
            p_agg = reachable_target(rng, zs, Zagg)
            t0 = time.perf_counter()
            try:
                res = disaggregate(p_agg, zs, ac, params, Zagg)
            except NumericalFailure:
                violations += 1
                continue
            t_sub = time.perf_counter() - t0
            sum_err = max(sum_err, float(np.abs(res.trajectories.sum(axis=0) - p_agg).max()))
            backend = "highs" if J >= cfg["highs_from"] else "simplex"
            _, v_lp = disaggregate_beta_lp(p_agg, zs, costs, backend=backend)
            gap = (res.objective - v_lp) / max(abs(v_lp), 1e-9)
            rows.append((J, s, res.objective, v_lp, gap, res.iterations, t_sub))
    gaps = np.array([r[4] for r in rows]) if rows else np.array([np.inf])
    m = {"max_gap": float(gaps.max()), "min_gap": float(gaps.min()),
         "invariant_violations": violations, "max_sum_error": sum_err, "runs": len(rows)}
    for J in cfg["sizes"]:
        g = [r[4] for r in rows if r[0] == J]
        m[f"max_gap_J{J}"] = float(max(g)) if g else float("inf")
    # the subgradient point is feasible, so it cannot beat the exact optimum
    ok = violations == 0 and m["max_gap"] <= cfg["max_gap"] and m["min_gap"] >= -1e-7
    return SuiteResult("gap", cfg, m, rows,
                       ("J", "seed", "subgradient_objective", "lp_objective", "gap", "iterations", "seconds"), ok)


@_timed
def suite_scaling(cfg):
    """Subgradient wall-time at two pool sizes (median of repeats).

    Merge and full-pipeline times are recorded alongside but only the
    subgradient solve enters the ratio.
    """
    pool = fitted_pool(cfg["pool"], cfg["N"], cfg["t_s"], cfg["seed"])
    rows = []
    times = {}
    violations = 0
    sum_err = 0.0
    for J in cfg["sizes"]:
        rng = np.random.Generator(np.random.Philox(key=[cfg["seed"], J]))
        zs = [pool[i] for i in rng.integers(0, len(pool), J)]
        t0 = time.perf_counter()
        _, ac = random_costs("beta-normal", rng, zs, cfg["t_s"], systems=False)
        t_merge = time.perf_counter() - t0
        Zagg = minkowski_sum(zs)
        p_agg = reachable_target(rng, zs, Zagg)
        samples = []
        for _ in range(cfg["repeats"]):
            t0 = time.perf_counter()
            out = disaggregate_subgradient(p_agg, Zagg, ac)
            samples.append(time.perf_counter() - t0)
        t0 = time.perf_counter()
        try:
            res = disaggregate(p_agg, zs, ac, Zagg=Zagg)
            sum_err = max(sum_err, float(np.abs(res.trajectories.sum(axis=0) - p_agg).max()))
        except NumericalFailure:
            violations += 1
        t_full = time.perf_counter() - t0
        times[J] = float(np.median(samples))
        rows.append((J, cfg["N"], times[J], out.iterations, t_merge, t_full))
    small, large = cfg["sizes"][0], cfg["sizes"][-1]
    ratio = times[large] / times[small]
    m = {f"seconds_J{J}": t for J, t in times.items()}
    m.update({f"merge_seconds_J{r[0]}": r[4] for r in rows})
    m.update({f"iterations_J{r[0]}": r[3] for r in rows})
    m.update(ratio=ratio, invariant_violations=violations, max_sum_error=sum_err)
    ok = ratio <= cfg["max_ratio"] and violations == 0
    return SuiteResult("scaling", cfg, m, rows,
                       ("J", "N", "subgradient_seconds", "iterations", "merge_seconds", "pipeline_seconds"), ok)


def random_pe_zonotope(rng, N, zero_prob=0.0):
    bb = rng.uniform(0.1, 2.0, 2 * N - 1)
    if zero_prob:
        bb[rng.uniform(size=bb.size) < zero_prob] = 0.0
    return Zonotope("pe", rng.normal(size=N), bb)


@_timed
def suite_minkowski(cfg):
    """Closed-form sum against the hull of pairwise vertex sums."""
    rng = np.random.default_rng(cfg["seed"])
    worst = 0.0
    mismatches = 0
    for _ in range(cfg["pairs"]):
        a, b = random_pe_zonotope(rng, cfg["N"]), random_pe_zonotope(rng, cfg["N"])
        va, vb = zonotope_vertices(a), zonotope_vertices(b)
        ref = hull_vertices((va[:, None, :] + vb[None, :, :]).reshape(-1, cfg["N"]))
        got = zonotope_vertices(minkowski_sum([a, b]))
        if got.shape != ref.shape:
            mismatches += 1
            continue
        worst = max(worst, float(np.abs(got - ref).max()))
    m = {"max_vertex_error": worst, "shape_mismatches": mismatches}
    return SuiteResult("minkowski", cfg, m, [], (), mismatches == 0 and worst <= cfg["tol"])


@_timed
def suite_membership(cfg):
    """Facet-inequality membership against the LP membership oracle."""
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    for N in cfg["dims"]:
        disagree = 0
        inside = 0
        for _ in range(cfg["zonotopes"]):
            Z = random_pe_zonotope(rng, N, zero_prob=0.15)
            spread = Z.widths().max() / 2.0
            pts = Z.center + rng.uniform(-1.0, 1.0, (cfg["points"], N)) * spread
            for p in pts:
                a = contains_point(Z, None, p)
                inside += a
                disagree += a != lp_membership(Z, p)
        rows.append((N, cfg["zonotopes"] * cfg["points"], inside, disagree))
    total = sum(r[3] for r in rows)
    m = {"disagreements": total, "points": sum(r[1] for r in rows),
         "inside_fraction": sum(r[2] for r in rows) / sum(r[1] for r in rows)}
    return SuiteResult("membership", cfg, m, rows, ("N", "points", "inside", "disagreements"), total == 0)


@_timed
def suite_facets(cfg):
    """Exact facet counts, full and with each single bound zeroed.

    Zeroing a bound removes a facet pair only when no other generator pair
    spans the same hyperplane; for interior axis generators another pair
    does, so their counts stay at ``N^2 + N``. The pass condition is the full
    count plus a strict drop for the last generator (a difference
    generator), and no count above ``N^2 + N`` anywhere.
    """
    rng = np.random.default_rng(cfg["seed"])
    rows = []
    ok = True
    for N in cfg["dims"]:
        Z = random_pe_zonotope(rng, N)
        full = facet_count(zonotope_corners(Z))
        counts = []
        for i in range(2 * N - 1):
            bb = Z.betabar.copy()
            bb[i] = 0.0
            counts.append(facet_count(zonotope_corners(Zonotope("pe", Z.center, bb))))
        rows.append((N, full, N * N + N, *counts))
        ok &= full == N * N + N and counts[-1] < N * N + N and max(counts) <= N * N + N
    m = {f"facets_N{r[0]}": r[1] for r in rows}
    m.update({f"zeroed_N{r[0]}": list(r[3:]) for r in rows})
    return SuiteResult("facets", cfg, m, rows, ("N", "full", "bound"), bool(ok))


@_timed
def suite_baseline(cfg):
    """Baseline cost of polytopes, zonotopes and boxes at common regulation levels."""
    N, t_s = cfg["N"], cfg["t_s"]
    v_hat = sample_prices(N).values
    rows = []
    bad_order = 0
    bad_mono = 0
    for k in range(cfg["fleets"]):
        scen = sample_fleet(cfg["J"], N=N, t_s=t_s, seed=cfg["seed"] + k)
        fits = [fit_system(p) for p in scen.params()]
        ps = [build_pe_polytope(p) for p in scen.params()]
        zs = [f.zonotope for f in fits]
        bs = [f.box for f in fits]
        cz, cb = max_capacity_zono(zs), max_capacity_zono(bs)
        r_top = min(cz.r_max, cb.r_max, max_capacity_poly(ps))
        prev = {}
        for frac in cfg["fractions"]:
            r = frac * r_top
            rp = baseline_cost_poly_oracle(ps, 0.0, v_hat, t_s, r)
            rz = baseline_cost_zono(zs, cz, r / cz.r_max if cz.r_max > 0 else 0.0, 0.0, v_hat, t_s).cost
            rb = baseline_cost_zono(bs, cb, r / cb.r_max if cb.r_max > 0 else 0.0, 0.0, v_hat, t_s).cost
            bad_order += not (rp <= rz + cfg["tol"] and rz <= rb + cfg["tol"])
            for name, val in (("poly", rp), ("zono", rz), ("box", rb)):
                bad_mono += name in prev and val < prev[name] - cfg["tol"]
                prev[name] = val
            rows.append((k, frac, r, rp, rz, rb))
    m = {"order_violations": int(bad_order), "monotonicity_violations": int(bad_mono),
         "cases": len(rows)}
    return SuiteResult("baseline", cfg, m, rows,
                       ("fleet", "fraction", "r_kw", "polytope_eur", "zonotope_eur", "box_eur"),
                       bad_order == 0 and bad_mono == 0)


def random_pwl_cost(rng, g, max_segments=4):
    from .costs import PwlComponent

    comps = []
    for _ in range(g):
        m = int(rng.integers(1, max_segments + 1))
        lengths = rng.uniform(0.1, 1.0, m)
        slopes = np.sort(rng.normal(size=m))
        comps.append(PwlComponent(lengths, slopes, float(rng.normal())))
    return SystemCost(tuple(comps), float(rng.normal()))


@_timed
def suite_infconv(cfg):
    """Merged aggregate cost against the epigraph LP of the infimal convolution."""
    worst = 0.0
    for s in range(cfg["seeds"]):
        rng = system_rng(s, 0)
        costs = [random_pwl_cost(rng, cfg["g"]) for _ in range(cfg["J"])]
        ac = merge_aggregate_cost(costs)
        for _ in range(cfg["points"]):
            beta = rng.uniform(-1.0, 1.0, cfg["g"]) * ac.betabar
            worst = max(worst, abs(eval_aggregate(ac, beta) - infimal_convolution_lp(costs, beta)))
    m = {"max_abs_error": worst}
    return SuiteResult("infconv", cfg, m, [], (), worst <= cfg["tol"])


SUITES = {
    "lambda": suite_lambda,
    "gap": suite_gap,
    "scaling": suite_scaling,
    "minkowski": suite_minkowski,
    "membership": suite_membership,
    "facets": suite_facets,
    "baseline": suite_baseline,
    "infconv": suite_infconv,
}

PROFILES = {name: (name,) for name in SUITES}
PROFILES["all"] = tuple(SUITES)
PROFILES["quick"] = ("minkowski", "facets", "infconv")


def run_profile(profile: str, seed: int = 0, overrides: dict | None = None) -> RunReport:
    if profile not in PROFILES:
        raise KeyError(profile)
    overrides = overrides or {}
    suites, config = [], {"seed": seed}
    for name in PROFILES[profile]:
        cfg = {**DEFAULTS[name], "seed": seed, **overrides.get(name, {})}
        config[name] = cfg
        suites.append(SUITES[name](cfg))
    return RunReport(profile, config, suites)


__all__ = ["SuiteResult", "RunReport", "DEFAULTS", "SUITES", "PROFILES", "run_profile", "config_hash",
           "fitted_pool", "random_costs", "reachable_target", *(f.__name__ for f in SUITES.values())]
