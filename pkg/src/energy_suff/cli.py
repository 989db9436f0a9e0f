"""Command-line front end: ``run``, ``compare`` and ``plot``.

Exit codes: 0 clean run, 2 budget violated, 3 safety QP infeasible,
64 usage error, 65 bad input data, 74 I/O error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .controller import UnicycleSettings
from .errors import EmptyTrace, EnergySuffError
from .files import ScenarioFileError, load_scenario, metrics_json, read_trace, write_atomic, write_trace, write_trace_csv
from .power import UnicyclePower
from .sim import Scenario, run, with_baseline
from .svg import PANEL_NAMES, panel_svg

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_INFEASIBLE = 3
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_IO = 74
THREADS_ENV = "ENERGY_SUFF_THREADS"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="energy-suff", description="Energy-sufficient return-to-base simulations.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--scenario", required=True, help="scenario JSON file")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--model", choices=("integrator", "unicycle"), help="override the robot model")
        sp.add_argument("--dt", type=float, help="override the step size [s]")
        sp.add_argument("--quiet", action="store_true", help="suppress the summary on stdout")

    r = sub.add_parser("run", help="simulate one scenario")
    common(r)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--controller", choices=("escbf", "baseline"), default="escbf")
    r.add_argument("--tau", type=float, help="baseline trigger fraction of remaining energy")
    r.add_argument("--csv", action="store_true", help="also write trace.csv")

    c = sub.add_parser("compare", help="batch the barrier controller against threshold baselines")
    common(c)
    c.add_argument("--seeds", type=int, default=10, help="number of seeds, 0..N-1")
    c.add_argument("--tau", type=float, action="append", help="baseline threshold; repeat for several")
    c.add_argument("--controller", choices=("escbf", "baseline"), help="run only one controller family")

    pl = sub.add_parser("plot", help="render trace panels as SVG")
    pl.add_argument("--trace", required=True)
    pl.add_argument("--panel", action="append", required=True, help=f"one of {', '.join(PANEL_NAMES)}; repeatable")
    pl.add_argument("--out", required=True, help="SVG file for a single panel, otherwise a directory")
    pl.add_argument("--quiet", action="store_true")
    return p


def apply_overrides(scenario: Scenario, model: str | None, dt: float | None) -> Scenario:
    if dt is not None:
        scenario = replace(scenario, dt=dt)
    if model == "integrator":
        scenario = replace(scenario, variant="single_integrator")
    elif model == "unicycle" and scenario.variant != "unicycle":
        cfg = scenario.controller
        if cfg.unicycle is None:
            plant = UnicyclePower(payload=cfg.model.payload)
            cfg = replace(cfg, unicycle=UnicycleSettings(model=plant), model=plant.linear_slice())
        scenario = replace(scenario, variant="unicycle", controller=cfg)
    return scenario


def _exit_status(metrics) -> int:
    if metrics.qp_infeasible:
        return EXIT_INFEASIBLE
    if metrics.budget_violated:
        return EXIT_VIOLATION
    return EXIT_OK


def run_command(args) -> int:
    scenario = apply_overrides(load_scenario(args.scenario), args.model, args.dt)
    if args.controller == "baseline":
        if args.tau is None:
            raise UsageError("--controller baseline needs --tau")
        scenario = with_baseline(scenario, args.tau)
    result = run(scenario, args.seed)
    out = Path(args.out)
    write_trace(result.trace, out / "trace.jsonl")
    if args.csv:
        write_trace_csv(result.trace, out / "trace.csv")
    label = "escbf" if scenario.baseline is None else f"baseline_{scenario.baseline.tau:g}"
    write_atomic(out / "metrics.json", metrics_json(result.metrics, seed=args.seed, controller=label))
    if not args.quiet:
        m = result.metrics
        eoa = "none" if m.eoa is None else f"{m.eoa:.3f} J"
        print(f"{label} seed={args.seed} arrived={m.arrival_time is not None} eoa={eoa} "
              f"min_h_e={m.min_h_e:.4g} violated={m.budget_violated} infeasible={m.qp_infeasible}")
    return _exit_status(result.metrics)


def _one_run(job: tuple[Scenario, int, str, str]) -> dict:
    scenario, seed, label, out = job
    result = run(scenario, seed)
    write_atomic(Path(out) / "runs" / f"{label}_seed{seed}.json", metrics_json(result.metrics, seed=seed, controller=label))
    m = result.metrics.as_dict()
    m.update(seed=seed, controller=label)
    return m


def thread_count(env=os.environ) -> int:
    raw = env.get(THREADS_ENV)
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise UsageError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return n


def _stats(values: list[float]) -> dict:
    if not values:
        return {"min": None, "median": None, "max": None}
    a = np.asarray(values, dtype=float)
    return {"min": float(a.min()), "median": float(np.median(a)), "max": float(a.max())}


def summarize(rows: list[dict], budget: float) -> dict:
    """Per-controller EOA distribution, violation counts and distance travelled."""
    out = {}
    for label in dict.fromkeys(r["controller"] for r in rows):
        mine = [r for r in rows if r["controller"] == label]
        eoa = [r["eoa"] for r in mine if r["eoa"] is not None]
        out[label] = {
            "runs": len(mine),
            "arrivals": len(eoa),
            "violations": sum(bool(r["budget_violated"]) for r in mine),
            "infeasible": sum(bool(r["qp_infeasible"]) for r in mine),
            "eoa": _stats(eoa),
            "eoa_pct": _stats([100.0 * e / budget for e in eoa]),
            "distance_traveled": _stats([r["distance_traveled"] for r in mine]),
        }
    return out


def summary_text(summary: dict) -> str:
    head = ("controller", "runs", "arrived", "violations", "EOA% min", "EOA% med", "EOA% max", "dist med")
    rows = [head]
    for label, s in summary.items():
        pct = s["eoa_pct"]
        fmt = lambda v: "-" if v is None else f"{v:.2f}"  # noqa: E731
        rows.append((label, str(s["runs"]), str(s["arrivals"]), str(s["violations"]),
                     fmt(pct["min"]), fmt(pct["median"]), fmt(pct["max"]), fmt(s["distance_traveled"]["median"])))
    widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
    return "\n".join("  ".join(c.rjust(w) if i else c.ljust(w) for i, (c, w) in enumerate(zip(r, widths)))
                     for r in rows) + "\n"


def compare_command(args) -> int:
    scenario = apply_overrides(load_scenario(args.scenario), args.model, args.dt)
    if args.seeds < 1:
        raise UsageError("--seeds must be at least 1")
    taus = args.tau if args.tau else [0.3, 0.6]
    variants: list[tuple[str, Scenario]] = []
    if args.controller in (None, "escbf"):
        variants.append(("escbf", scenario))
    if args.controller in (None, "baseline"):
        for tau in taus:
            variants.append((f"baseline_{tau:g}", with_baseline(scenario, tau)))
    jobs = [(sc, seed, label, args.out) for label, sc in variants for seed in range(args.seeds)]
    workers = min(thread_count(), len(jobs))
    if workers == 1:
        rows = [_one_run(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_one_run, jobs))
    summary = summarize(rows, scenario.budget)
    out = Path(args.out)
    write_atomic(out / "summary.json", json.dumps({"seeds": args.seeds, "controllers": summary}, indent=2) + "\n")
    text = summary_text(summary)
    write_atomic(out / "summary.txt", text)
    if not args.quiet:
        print(text, end="")
    if any(r["qp_infeasible"] for r in rows if r["controller"] == "escbf"):
        return EXIT_INFEASIBLE
    if any(r["budget_violated"] for r in rows if r["controller"] == "escbf"):
        return EXIT_VIOLATION
    return EXIT_OK


def plot_command(args) -> int:
    unknown = [p for p in args.panel if p not in PANEL_NAMES]
    if unknown:
        raise UsageError(f"unknown panel(s) {', '.join(unknown)}; choose from {', '.join(PANEL_NAMES)}")
    trace = read_trace(args.trace)
    out = Path(args.out)
    single = len(args.panel) == 1 and out.suffix == ".svg"
    for panel in args.panel:
        target = out if single else out / f"{panel}.svg"
        write_atomic(target, panel_svg(trace, panel))
        if not args.quiet:
            print(target)
    return EXIT_OK


COMMANDS = {"run": run_command, "compare": compare_command, "plot": plot_command}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"energy-suff: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioFileError, EmptyTrace) as exc:
        print(f"energy-suff: bad input: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"energy-suff: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except EnergySuffError as exc:
        print(f"energy-suff: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    raise SystemExit(main())
