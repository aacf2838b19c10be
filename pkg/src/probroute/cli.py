"""Command-line entry point.

Exit codes: 0 ok, 2 input error, 3 oracle budget exceeded, 4 infeasible k,
5 a configured check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .density import Density, InvalidDensityError
from .experiments import ConfigError, ExperimentConfig, run
from .objectives import evaluate, path_length
from .sampling import SampleSet, sample_points
from .schemes import ConfigurationError, ktsp_densest_cell, psitrp_sweep
from .solvers import BudgetExceededError, InfeasibleError, exact_k_tsp, exact_psi_trp, exact_tsp_path, heuristic_tsp_path

EXIT_OK, EXIT_INPUT, EXIT_BUDGET, EXIT_INFEASIBLE, EXIT_CHECK = 0, 2, 3, 4, 5


class InputError(Exception):
    pass


def prescale(points: np.ndarray, domain: list[float] | None) -> np.ndarray:
    """Map points of the rectangle ``xmin ymin xmax ymax`` into the unit square.

    Scaling is isotropic (by the longer side) so tours and objective ratios
    are unchanged.
    """
    if domain is None:
        return points
    xmin, ymin, xmax, ymax = domain
    side = max(xmax - xmin, ymax - ymin)
    if side <= 0:
        raise InputError("degenerate domain")
    return (points - np.array([xmin, ymin])) / side


def cmd_gen(args) -> int:
    try:
        d = Density.load(args.density)
    except (OSError, json.JSONDecodeError, InvalidDensityError) as exc:
        raise InputError(f"cannot load density {args.density}: {exc}") from exc
    if args.n < 0:
        raise InputError("n must be nonnegative")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    s = sample_points(d, args.n, args.seed)
    s.save(out / "points.csv", out / "points.json")
    print(f"wrote {len(s)} points to {out / 'points.csv'}")
    return EXIT_OK


def _solve(pts: np.ndarray, args):
    p, mode = args.problem, args.mode
    if p == "tsp":
        return exact_tsp_path(pts) if mode == "exact" else heuristic_tsp_path(pts)
    if p == "ktsp":
        if args.k is None:
            raise InputError("--k is required for ktsp")
        return exact_k_tsp(pts, args.k) if mode == "exact" else ktsp_densest_cell(pts, args.k, args.a)
    if mode == "exact":
        return exact_psi_trp(pts, args.alpha)
    return psitrp_sweep(pts, args.m)


def cmd_solve(args) -> int:
    try:
        s = SampleSet.read_csv(args.points)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot read points {args.points}: {exc}") from exc
    if len(s) == 0:
        raise InputError("no points to route")
    pts = prescale(s.points, args.domain)
    tour = _solve(pts, args)
    full = len(tour) == len(s)
    objectives = evaluate(s.points, tour, args.alpha) if full else {"path_length": path_length(s.points, tour)}
    doc = {
        "schema": 1,
        "problem": args.problem,
        "mode": args.mode,
        "params": {"k": args.k, "alpha": args.alpha, "m": args.m, "a": args.a, "domain": args.domain},
        "order": tour.to_json(),
        "objectives": objectives,
    }
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "tour.json").write_text(json.dumps(doc, indent=2) + "\n")
    print(json.dumps(objectives))
    return EXIT_OK


def cmd_rate(args) -> int:
    try:
        cfg = ExperimentConfig.load(args.config)
    except (ConfigError, ConfigurationError) as exc:
        raise InputError(str(exc)) from exc
    if args.workers is not None:
        cfg.workers = args.workers
    report = run(cfg)
    csv_path, json_path = report.write(args.out)
    for name, c in report.checks.items():
        print(f"{'PASS' if c['passed'] else 'FAIL'} {name}: {c['value']}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_OK if report.passed else EXIT_CHECK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="probroute", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="sample points from a density")
    g.add_argument("--density", required=True, help="density JSON {m, values}")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="route a point set")
    s.add_argument("--points", required=True, help="CSV with header x,y")
    s.add_argument("--problem", choices=["tsp", "ktsp", "psitrp"], required=True)
    s.add_argument("--mode", choices=["exact", "scheme"], default="scheme")
    s.add_argument("--k", type=int)
    s.add_argument("--alpha", type=float, default=1.0)
    s.add_argument("--m", type=int, default=2, help="sweep grid resolution")
    s.add_argument("--a", type=float, default=1.0, help="k-TSP partition scale")
    s.add_argument("--domain", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_solve)

    r = sub.add_parser("rate", help="run a Monte Carlo rate experiment")
    r.add_argument("--config", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--workers", type=int, help="override config worker count")
    r.set_defaults(func=cmd_rate)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ConfigurationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except BudgetExceededError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except InfeasibleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
