"""``flexpool`` command line.

Subcommands: sample, fit, aggregate, disaggregate, bidcurve, bench.
Exit codes: 0 success, 2 I/O or configuration error, 3 infeasible input,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import bench
from .costs import build_system_cost, cost_from_dict, merge_aggregate_cost, zero_flex_cost
from .disagg import SubgradientParams, disaggregate, disaggregate_beta_lp
from .errors import InfeasibleError, InfeasibleTarget, NumericalFailure, UnboundedError
from .fleet import PevRanges, load_prices, load_scenario, sample_fleet, sample_prices, save_scenario
from .io import atomic_write_csv, atomic_write_json, atomic_write_text
from .polytope import build_pe_polytope
from .regulation import (baseline_cost_poly_oracle, baseline_cost_zono, bid_curve, max_capacity_poly,
                         max_capacity_zono)
from .zonofit import fit_system
from .zonotope import load_zonotopes, minkowski_sum, save_zonotopes

EXIT_OK, EXIT_IO, EXIT_INFEASIBLE, EXIT_NUMERICAL = 0, 2, 3, 4
P_AGG_HEADER = ("step", "power_kw")
ORACLE_MAX_VARS = 2000      # J * N limit for the polytope comparison in bidcurve


class ConfigError(Exception):
    pass


def thread_count(args) -> int:
    n = args.threads if getattr(args, "threads", None) else os.environ.get("FLEXPOOL_THREADS", "1")
    try:
        n = int(n)
    except ValueError:
        raise ConfigError(f"invalid thread count {n!r}") from None
    if n < 1:
        raise ConfigError("thread count must be at least 1")
    return n


def fit_all(params, workers: int):
    if workers == 1 or len(params) == 1:
        return [fit_system(p) for p in params]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fit_system, params, chunksize=max(1, len(params) // (4 * workers))))


def price_vector(args, scenario, required=False):
    """``--prices`` file, else the scenario's series, else the bundled sample (or zeros)."""
    if args.prices:
        return load_prices(args.prices, scenario.N)
    if scenario.prices is not None:
        v = scenario.prices.values
        if v.size != scenario.N:
            raise ConfigError(f"scenario prices have {v.size} entries, expected {scenario.N}")
        return scenario.prices
    return sample_prices(scenario.N) if required else None


def read_p_agg(path, N):
    values = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != P_AGG_HEADER:
            raise ConfigError(f"{path}: expected header {','.join(P_AGG_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                values.append(float(row[1]))
            except (IndexError, ValueError):
                raise ConfigError(f"{path}: line {lineno}: malformed row {row!r}") from None
    if len(values) != N:
        raise ConfigError(f"{path}: {len(values)} rows, expected {N}")
    return np.array(values)


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- commands --------------------------------------------------------------------

def cmd_sample(args):
    ranges = PevRanges()
    if args.ranges:
        with open(args.ranges) as fh:
            ranges = PevRanges.from_dict(json.load(fh))
    prices = load_prices(args.prices, args.N) if args.prices else None
    scen = sample_fleet(args.count, ranges, N=args.N, t_s=args.t_s, seed=args.seed, trips=args.trips,
                        prices=prices)
    path = _out_dir(args) / "scenario.json"
    save_scenario(path, scen)
    print(f"wrote {path} ({args.count} systems)")


def cmd_fit(args):
    scen = load_scenario(args.scenario)
    t0 = time.perf_counter()
    fits = fit_all(scen.params(), thread_count(args))
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    save_zonotopes(out / "zonotopes.json", [f.zonotope for f in fits])
    save_zonotopes(out / "boxes.json", [f.box for f in fits])
    rows = [(j, f.lambda_z, f.lambda_b, f.seconds) for j, f in enumerate(fits)]
    atomic_write_csv(out / "fit_report.csv", ("system_id", "lambda_z", "lambda_b", "fit_seconds"), rows)
    lz = float(np.mean([f.lambda_z for f in fits]))
    lb = float(np.mean([f.lambda_b for f in fits]))
    config = {"command": "fit", "scenario": scen.to_dict()}
    report = {"config": config, "config_hash": bench.config_hash(config), "phases": {"fit": elapsed},
              "metrics": {"systems": len(fits), "mean_lambda_z": lz, "mean_lambda_b": lb},
              "artifacts": {k: str(out / k) for k in ("zonotopes.json", "boxes.json", "fit_report.csv")}}
    atomic_write_json(out / "run_report.json", report)
    print(f"fitted {len(fits)} systems: mean lambda_z {lz:.4f}, mean lambda_b {lb:.4f}")


def cmd_aggregate(args):
    zs = []
    for path in args.zonotopes:
        zs.extend(load_zonotopes(path))
    if not zs:
        raise ConfigError("no zonotopes in the input files")
    Zagg = minkowski_sum(zs)
    path = _out_dir(args) / "aggregate.json"
    save_zonotopes(path, [Zagg])
    print(f"wrote {path} (sum of {len(zs)} zonotopes)")


def _system_costs(args, scen, zs):
    if args.costs:
        with open(args.costs) as fh:
            data = json.load(fh)
        entries = data["systems"]
        if len(entries) != len(zs):
            raise ConfigError(f"{len(entries)} cost entries for {len(zs)} systems")
        pairs = [cost_from_dict(e) for e in entries]
    else:
        prices = price_vector(args, scen)
        v = np.zeros(scen.N) if prices is None else prices.values
        pairs = [(zero_flex_cost(z.betabar), v) for z in zs]
    return [build_system_cost(flex, v, z, scen.t_s) for (flex, v), z in zip(pairs, zs)]


def cmd_disaggregate(args):
    scen = load_scenario(args.scenario)
    zs = load_zonotopes(args.zonotopes)
    if len(zs) != len(scen.specs):
        raise ConfigError(f"{len(zs)} zonotopes for {len(scen.specs)} systems")
    p_agg = read_p_agg(args.p_agg, scen.N)
    costs = _system_costs(args, scen, zs)
    t0 = time.perf_counter()
    ac = merge_aggregate_cost(costs)
    t_merge = time.perf_counter() - t0
    t0 = time.perf_counter()
    res = disaggregate(p_agg, zs, ac, SubgradientParams(h=args.h, eps=args.eps, max_iters=args.max_iters))
    t_solve = time.perf_counter() - t0
    out = _out_dir(args)
    header = ("system_id", *(f"p{k}" for k in range(scen.N)))
    atomic_write_csv(out / "trajectories.csv", header,
                     ([j, *map(float, row)] for j, row in enumerate(res.trajectories)))
    summary = {"objective": res.objective, "iterations": res.iterations, "converged": res.converged,
               "beta_agg": res.beta_agg_star.tolist(), "systems": len(zs),
               "phases": {"merge": t_merge, "disaggregate": t_solve}}
    if args.oracle:
        t0 = time.perf_counter()
        _, v_lp = disaggregate_beta_lp(p_agg, zs, costs, backend=args.lp_backend)
        summary["oracle_objective"] = v_lp
        summary["gap"] = (res.objective - v_lp) / max(abs(v_lp), 1e-9)
        summary["phases"]["oracle"] = time.perf_counter() - t0
    atomic_write_json(out / "result.json", summary)
    msg = f"objective {res.objective:.6g} after {res.iterations} iterations"
    if args.oracle:
        msg += f"; gap vs LP {summary['gap']:.3g}"
    print(msg)


def _eta_grid(text):
    if text is None:
        return None
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise ConfigError(f"invalid eta grid {text!r}") from None


def cmd_bidcurve(args):
    scen = load_scenario(args.scenario)
    v_hat = price_vector(args, scen, required=True)
    params = scen.params()
    if args.zonotopes:
        zs = load_zonotopes(args.zonotopes)
        boxes = None
    else:
        fits = fit_all(params, thread_count(args))
        zs, boxes = [f.zonotope for f in fits], [f.box for f in fits]
    try:
        grid = _eta_grid(args.eta_grid)
        cap = max_capacity_zono(zs)
        curve = bid_curve(zs, 0.0, v_hat.values, scen.t_s, grid, cap=cap, price_source=v_hat.source)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    out = _out_dir(args)
    atomic_write_csv(out / "bidcurve.csv", ("eta", "r_kw", "baseline_cost_eur", "offer_cost_eur"),
                     curve.rows())
    print(f"r_max {cap.r_max:.4f} kW; wrote {out / 'bidcurve.csv'} ({len(curve.points)} points)")
    if not args.oracle:
        return
    if len(zs) * scen.N > ORACLE_MAX_VARS:
        print(f"skipping polytope comparison: J*N = {len(zs) * scen.N} exceeds {ORACLE_MAX_VARS}")
        return
    if boxes is None:
        boxes = [f.box for f in fit_all(params, thread_count(args))]
    ps = [build_pe_polytope(p) for p in params]
    cb = max_capacity_zono(boxes)
    r_poly = max_capacity_poly(ps)
    rows = []
    for pt in curve.points:
        rp = baseline_cost_poly_oracle(ps, 0.0, v_hat.values, scen.t_s, pt.r) if pt.r <= r_poly else float("nan")
        if pt.r <= cb.r_max:
            eta_b = pt.r / cb.r_max if cb.r_max > 0 else 0.0
            rb = baseline_cost_zono(boxes, cb, eta_b, 0.0, v_hat.values, scen.t_s).cost
        else:
            rb = float("nan")
        rows.append((pt.eta, pt.r, rp, pt.baseline_cost, rb))
    atomic_write_csv(out / "comparison.csv", ("eta", "r_kw", "polytope_eur", "zonotope_eur", "box_eur"), rows)
    print(f"wrote {out / 'comparison.csv'}")


def cmd_bench(args):
    overrides = {}
    if args.config:
        with open(args.config) as fh:
            overrides = json.load(fh)
    report = bench.run_profile(args.profile, seed=args.seed, overrides=overrides)
    out = _out_dir(args)
    for s in report.suites:
        if s.rows:
            path = out / f"{s.name}.csv"
            atomic_write_csv(path, s.header, s.rows)
            report.artifacts[s.name] = str(path)
    atomic_write_json(out / "run_report.json", report.to_dict())
    text = report.summary()
    atomic_write_text(out / "summary.txt", text + "\n")
    print(text)


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="flexpool", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, scenario=True):
        if scenario:
            p.add_argument("--scenario", required=True, help="scenario JSON file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: FLEXPOOL_THREADS or 1)")

    p = sub.add_parser("sample", help="sample a PEV fleet scenario")
    common(p, scenario=False)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--N", type=int, default=12)
    p.add_argument("--t-s", dest="t_s", type=float, default=2.0, help="step length in hours")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trips", action="store_true", help="sample trip windows")
    p.add_argument("--ranges", help="JSON file with p_max, p_min, capacity, soc0 ranges")
    p.add_argument("--prices", help="price CSV stored with the scenario")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("fit", help="fit zonotopes and boxes for every system")
    common(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("aggregate", help="Minkowski sum of zonotope files")
    p.add_argument("zonotopes", nargs="+", help="zonotope JSON files")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_aggregate)

    p = sub.add_parser("disaggregate", help="split an aggregate trajectory among the systems")
    common(p)
    p.add_argument("--zonotopes", required=True, help="zonotope JSON from `fit`")
    p.add_argument("--p-agg", dest="p_agg", required=True, help="CSV with header step,power_kw")
    p.add_argument("--costs", help="JSON cost file (default: energy prices only)")
    p.add_argument("--prices", help="price CSV used when --costs is absent")
    p.add_argument("--oracle", action="store_true", help="also solve the exact LP and report the gap")
    p.add_argument("--lp-backend", choices=("simplex", "highs"), default="simplex")
    p.add_argument("--h", type=int, default=5)
    p.add_argument("--eps", type=float, default=1e-3)
    p.add_argument("--max-iters", type=int, default=100_000)
    p.set_defaults(func=cmd_disaggregate)

    p = sub.add_parser("bidcurve", help="regulation bid curve over a reservation grid")
    common(p)
    p.add_argument("--zonotopes", help="zonotope JSON (default: fit from the scenario)")
    p.add_argument("--prices", help="expected wholesale price CSV (default: bundled sample)")
    p.add_argument("--eta-grid", help="comma-separated reservation shares in [0, 1]")
    p.add_argument("--oracle", action="store_true", help="add the polytope/zonotope/box comparison")
    p.set_defaults(func=cmd_bidcurve)

    p = sub.add_parser("bench", help="run a benchmark profile")
    p.add_argument("--profile", required=True, choices=sorted(bench.PROFILES))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", help="JSON file of per-suite overrides, e.g. {\"gap\": {\"seeds\": 5}}")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except InfeasibleTarget as exc:
        print(f"infeasible: {exc} (facet index {exc.facet})", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (NumericalFailure, UnboundedError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, ConfigError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
