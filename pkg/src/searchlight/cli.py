"""``searchlight`` command line."""

from __future__ import annotations

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import Sequence

from . import characterization as ch
from .combined import combined_entropy_path, combined_path_optimal
from .config import ConfigError, load_scenario
from .grid import DomainError, PathPlan, path_cost
from .harness import METHODS, MethodPlans, fmt, run_campaign, write_campaign
from .objective import SearchPlanner, search_path_value
from .planner import mowing_the_lawn_path


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _methods(text: str) -> list[str]:
    out = [m.strip() for m in text.split(",") if m.strip()]
    bad = [m for m in out if m not in METHODS]
    if bad or not out:
        raise argparse.ArgumentTypeError(
            f"unknown method(s) {', '.join(bad) or '(none)'}; choose from {', '.join(METHODS)}")
    return out


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="searchlight",
                                description="Search and environment-characterization planning.")
    sub = p.add_subparsers(dest="command", required=True, metavar="command")

    def common(sp, default_scenario="survey_10x10"):
        sp.add_argument("--scenario", default=default_scenario,
                        help="bundled scenario name or path to a YAML file")
        sp.add_argument("--seed", type=int, default=None, help="root seed (overrides scenario)")
        sp.add_argument("--out", type=Path, default=None, help="directory for CSV output")
        sp.add_argument("--no-strict", action="store_true",
                        help="warn about unknown config keys instead of failing")

    sp = sub.add_parser("plan-search", help="optimal search path with prior beliefs")
    common(sp)
    sp.add_argument("--budget", type=float, default=None)

    sp = sub.add_parser("plan-char", help="characterization path")
    common(sp)
    sp.add_argument("--method", choices=ch.CHAR_METHODS, default=None)
    sp.add_argument("--nbar", type=int, default=None)
    sp.add_argument("--budget", type=float, default=None)

    sp = sub.add_parser("plan-combined", help="path for a vehicle carrying both sensors")
    common(sp)
    sp.add_argument("--objective", choices=("proposed", "entropy", "mtl"), default="proposed")
    sp.add_argument("--budget", type=float, default=None)
    sp.add_argument("--beta", type=float, default=None)

    sp = sub.add_parser("approx-gain", help="sampled characterization gain of a path")
    common(sp)
    sp.add_argument("--path", type=_ints, required=True, help="comma-separated cell indices")
    sp.add_argument("--nbar", type=int, default=None)
    sp.add_argument("--epsilon", type=float, default=None)
    sp.add_argument("--exact", action="store_true", help="also enumerate the exact gain")

    sp = sub.add_parser("simulate", help="Monte Carlo campaign")
    common(sp)
    sp.add_argument("--methods", type=_methods, default=list(METHODS))
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--bins", type=int, default=40)

    sp = sub.add_parser("validate-bounds", help="empirical check of the sampling certificates")
    common(sp, default_scenario="toy_2x3")
    sp.add_argument("--path", type=_ints, default=[0, 1, 2])
    sp.add_argument("--eps", type=_floats, default=[0.05, 0.1, 0.2])
    sp.add_argument("--nbar", type=int, default=200)
    sp.add_argument("--reps", type=int, default=500)
    sp.add_argument("--skip-optimal", action="store_true")
    return p


def _plan_rows(plan: PathPlan, grid) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", "cell", "row", "col", "region"])
    for i, c in enumerate(plan.cells):
        r, col = grid.rc(c)
        w.writerow([i, c, r, col, grid.regions[c] if grid.regions else ""])
    return buf.getvalue()


def _emit_plan(args, label: str, plan: PathPlan, grid, value_name: str = "value") -> None:
    regions = {}
    if grid.regions:
        for c in plan.cells:
            regions[grid.regions[c]] = regions.get(grid.regions[c], 0) + 1
    print(f"{label}: {len(plan.cells)} cells, cost {fmt(plan.cost)}, "
          f"{value_name} {fmt(plan.value)}")
    if regions:
        print("regions: " + ", ".join(f"{k}={v}" for k, v in sorted(regions.items())))
    print("cells: " + " ".join(str(c) for c in plan.cells))
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / f"{args.command}.csv"
        path.write_text(_plan_rows(plan, grid))
        summary = args.out / f"{args.command}_summary.csv"
        summary.write_text(f"label,cells,cost,value\n{label},{len(plan.cells)},"
                           f"{fmt(plan.cost)},{fmt(plan.value)}\n")
        print(f"wrote {path} and {summary}")


def _run(args) -> int:
    cfg = load_scenario(args.scenario, strict=not args.no_strict)
    sc = cfg.scenario()
    seed = cfg.seed if args.seed is None else args.seed
    grid = sc.grid

    if args.command == "plan-search":
        budget = sc.search_budget if args.budget is None else args.budget
        plan = SearchPlanner(grid, sc.search_sensor, sc.motion, budget).prior_plan
        _emit_plan(args, "search path", plan, grid, "anticipated accuracy")

    elif args.command == "plan-char":
        method = args.method or sc.char_method
        nbar = sc.n_bar if args.nbar is None else args.nbar
        budget = sc.char_budget if args.budget is None else args.budget
        ctx = ch.CharacterizationContext(grid, sc.search_sensor, sc.char_sensor, sc.motion,
                                         sc.search_budget, sc.params)
        plan = ch.char_path_optimal(ctx, sc.char_motion, budget, method, nbar, seed, sc.weighted)
        _emit_plan(args, f"characterization path ({method})", plan, grid, "objective")

    elif args.command == "plan-combined":
        budget = sc.search_budget if args.budget is None else args.budget
        if args.objective == "proposed":
            plan = combined_path_optimal(grid, sc.motion, budget, sc.search_sensor,
                                         sc.char_sensor, sc.params)
        elif args.objective == "entropy":
            beta = sc.beta if args.beta is None else args.beta
            plan = combined_entropy_path(grid, sc.motion, budget, sc.search_sensor,
                                         sc.char_sensor, beta, sc.weighted)
        else:
            cells = mowing_the_lawn_path(grid, sc.motion, budget)
            plan = PathPlan(cells, path_cost(grid, cells, sc.motion),
                            search_path_value(grid, cells, sc.search_sensor))
        _emit_plan(args, f"combined path ({args.objective})", plan, grid, "objective")

    elif args.command == "approx-gain":
        nbar = sc.n_bar if args.nbar is None else args.nbar
        eps = cfg.epsilon if args.epsilon is None else args.epsilon
        ctx = ch.CharacterizationContext(grid, sc.search_sensor, sc.char_sensor, sc.motion,
                                         sc.search_budget, sc.params)
        est = ch.approximate_char_gain(ctx, args.path, nbar, seed, eps)
        print(f"approximate gain {fmt(est.value)}")
        print(f"samples: n_bar {est.n_bar}, pooled minimum {est.n_total}")
        print(f"hoeffding: epsilon {fmt(eps)}, confidence {fmt(est.confidence)}")
        exact = None
        if args.exact:
            exact = ch.exact_char_gain(ctx, args.path)
            print(f"exact gain {fmt(exact)}")
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / "approx_gain.csv"
            with path.open("w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["cell", "reading", "k", "k_pool", "n_pool", "p_hat"])
                for (cell, y), (k, kp, npool) in sorted(est.counts.items()):
                    w.writerow([cell, " ".join(map(str, y)), k, kp, npool,
                                fmt(est.p_hat[(cell, y)])])
            (args.out / "approx_gain_summary.csv").write_text(
                "value,n_bar,n_total,epsilon,confidence,exact\n"
                f"{fmt(est.value)},{est.n_bar},{est.n_total},{fmt(eps)},"
                f"{fmt(est.confidence)},{'' if exact is None else fmt(exact)}\n")
            print(f"wrote {path}")

    elif args.command == "simulate":
        plans = MethodPlans(sc)
        res = run_campaign(sc, args.methods, args.trials, seed, plans)
        print(f"{args.trials} trials, seed {seed}")
        print(f"{'method':<20}{'mean error':>16}{'reduction %':>14}{'mean actual':>16}")
        for m in res.methods:
            s = res.summary[m]
            print(f"{m:<20}{fmt(s['mean_error']):>16}{fmt(s['reduction_pct']):>14}"
                  f"{fmt(s['mean_actual']):>16}")
        if args.out is not None:
            files = write_campaign(res, args.out, args.bins)
            print(f"wrote {len(files)} files to {args.out}")

    elif args.command == "validate-bounds":
        ctx = ch.CharacterizationContext(grid, sc.search_sensor, sc.char_sensor, sc.motion,
                                         sc.search_budget, sc.params.normalized())
        rows = []
        for eps in args.eps:
            checks = [ch.validate_gain_bound(ctx, args.path, eps, args.nbar, args.reps, seed)]
            if not args.skip_optimal:
                checks.append(ch.validate_optimal_bound(ctx, sc.char_motion, sc.char_budget, eps,
                                                        args.nbar, args.reps, seed))
            for chk in checks:
                status = "PASS" if chk.passed else "FAIL"
                print(f"{status} {chk.name:<8} eps {fmt(eps):<6} guarantee {fmt(chk.guarantee)} "
                      f"observed {fmt(chk.frequency)} (tight event {fmt(chk.tight_frequency)})")
                rows.append(chk)
        if args.out is not None:
            args.out.mkdir(parents=True, exist_ok=True)
            path = args.out / "bounds.csv"
            with path.open("w", newline="") as f:
                w = csv.writer(f, lineterminator="\n")
                w.writerow(["event", "epsilon", "n_total", "guarantee", "frequency",
                            "tight_frequency", "repetitions", "passed"])
                for c in rows:
                    w.writerow([c.name, fmt(c.epsilon), c.n_total, fmt(c.guarantee),
                                fmt(c.frequency), fmt(c.tight_frequency), c.repetitions,
                                int(c.passed)])
        if not all(c.passed for c in rows):
            return 1
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run(args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
