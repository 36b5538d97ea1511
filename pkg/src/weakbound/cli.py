"""``weakbound`` command-line interface.

Exit codes: 0 all checks pass, 1 tolerance failure, 2 configuration error,
3 solver error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .errors import ConfigError, SolverError, WeakboundError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _cmd_run(args) -> int:
    from .config import parse_config
    from .runner import emit, run_experiment

    cfg = parse_config(args.config)
    out = args.out if args.out is not None else cfg.values.get("output")
    fmt = args.format or cfg.values.get("format")
    if fmt is None:
        fmt = "json" if out is not None and out.lower().endswith(".json") else "csv"
    result = run_experiment(cfg, jobs=args.jobs)
    text = emit(result.records, fmt, out, result.summary, timings=args.timings)
    s = result.summary
    status = "PASS" if s["pass"] else "FAIL"
    line = (
        f"{status} kind={s['kind']} fitted_slope={s['fitted_slope']:.10g} "
        f"formula_slope={s['formula_slope']:.10g} relative_deviation={s['relative_deviation']:.3e}"
    )
    if out is None:
        sys.stdout.write(text)
        print(line, file=sys.stderr)
    else:
        print(line)
    return EXIT_OK if s["pass"] else EXIT_FAIL


def _cmd_selftest(args) -> int:
    from .acceptance import run_all

    numbers = {int(t) for t in args.only.split(",")} if args.only else None
    results = run_all(numbers, echo=print)
    passed = sum(c.passed for c in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def _cmd_graph_spectrum(args) -> int:
    from .graph import MetricGraph, graph_spectrum, read_graph

    gf = read_graph(args.graph)
    g = gf.graph
    if args.h is not None:
        g = MetricGraph(g.vertex_count, g.edges, args.h)
    vals = graph_spectrum(g, args.count)
    for v in np.asarray(vals):
        print(format(float(v), ".12g"))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="weakbound", description="Weakly coupled bound states of Neumann Laplacians.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an alpha sweep from a TOML config")
    r.add_argument("config")
    r.add_argument("--out", help="output file (default: config 'output' or stdout)")
    r.add_argument("--format", choices=("csv", "json"))
    r.add_argument("--jobs", type=int, default=1, help="alpha points solved concurrently")
    r.add_argument("--timings", action="store_true", help="fill wall_time_ms (output no longer reproducible)")
    r.set_defaults(func=_cmd_run)

    s = sub.add_parser("selftest", help="run the acceptance suite")
    s.add_argument("--only", help="comma-separated criterion numbers")
    s.set_defaults(func=_cmd_selftest)

    g = sub.add_parser("graph-spectrum", help="lowest eigenvalues of a metric graph file")
    g.add_argument("graph")
    g.add_argument("--count", type=int, default=10)
    g.add_argument("--h", type=float, default=None, help="grid spacing (default: shortest edge / 64)")
    g.set_defaults(func=_cmd_graph_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (ConfigError, WeakboundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
