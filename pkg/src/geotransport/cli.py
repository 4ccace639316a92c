"""Command-line front end: ``gen``, ``solve``, ``verify`` and ``bench``."""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Sequence

from . import bench, fileio, wspd_approx
from .core import Metric, plan_cost, verify_plan
from .errors import InfeasibleError, InstanceError, InvariantViolation, ParseError
from .generators import Distribution, generate

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_PARSE = 2
EXIT_INFEASIBLE = 3
EXIT_INTERNAL = 4

SEED_ENV = "EMD_SEED"


class UsageError(Exception):
    pass


def _seed(args: argparse.Namespace, required: bool) -> int | None:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV}={env!r} is not an integer") from None
    if required:
        raise UsageError(f"a seed is required: pass --seed or set {SEED_ENV}")
    return None


def _int_list(text: str) -> list[int]:
    return [int(tok) for tok in text.replace(",", " ").split()]


def _cmd_gen(args: argparse.Namespace) -> int:
    seed = _seed(args, required=True)
    inst = generate(args.n, args.max_weight, args.dist, seed, args.metric)
    text = fileio.format_instance(inst)
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_solve(args: argparse.Namespace) -> int:
    inst = fileio.read_instance(args.instance)
    algo = args.algo
    if algo in ("grid", "wspd") and args.eps is None:
        raise UsageError(f"--eps is required for algo {algo}")
    seed = _seed(args, required=algo == "grid")
    start = time.perf_counter()
    if algo == "wspd" and args.dump_graph:
        run = wspd_approx.solve_detailed(inst, args.eps)
        run.graph.dump(args.dump_graph)
        plan = run.plan
    else:
        plan = bench.run_solver(
            algo,
            inst,
            eps=args.eps,
            seed=seed,
            bounded_spread=args.assume_bounded_spread,
            check_invariants=args.check_invariants,
        )
    elapsed = (time.perf_counter() - start) * 1000.0
    report = verify_plan(inst, plan)
    if not report:
        raise InvariantViolation(f"solver returned an infeasible plan: {report}")
    if args.output:
        cost = fileio.write_plan(inst, plan, args.output)
    else:
        cost = plan_cost(inst, plan)
    print(f"algo={algo} n={inst.n} cost={cost!r} time_ms={elapsed:.3f}")
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    inst = fileio.read_instance(args.instance)
    plan, recorded = fileio.read_plan(args.plan)
    report = verify_plan(inst, plan)
    if not report:
        print(f"violation: {report}")
        return EXIT_FAIL
    cost = plan_cost(inst, plan)
    if recorded is not None and abs(recorded - cost) > 1e-9 * max(1.0, abs(cost)):
        print(f"violation: recorded cost {recorded!r} differs from plan cost {cost!r}")
        return EXIT_FAIL
    print(f"ok cost={cost!r}")
    return EXIT_OK


def _cmd_bench(args: argparse.Namespace) -> int:
    algos = [a.strip() for a in args.algos.split(",") if a.strip()]
    unknown = [a for a in algos if a not in bench.ALGORITHMS]
    if unknown:
        raise UsageError(f"unknown algorithms: {', '.join(unknown)}")
    if any(a in ("grid", "wspd") for a in algos) and args.eps is None:
        raise UsageError("--eps is required when benchmarking grid or wspd")
    if args.seeds:
        seeds = _int_list(args.seeds)
    else:
        base = _seed(args, required=False) or 0
        seeds = list(range(base, base + args.repeats))

    def progress(rec: bench.BenchRecord) -> None:
        if not args.quiet:
            print(f"{rec.algo} n={rec.n} seed={rec.seed} {rec.status} {rec.wall_ms:.1f} ms", file=sys.stderr)

    records = bench.run_matrix(
        algos,
        _int_list(args.sizes),
        seeds,
        max_weight=args.max_weight,
        eps=args.eps,
        dist=args.dist,
        metric=args.metric,
        jobs=args.jobs,
        oracle_limit=args.oracle_limit,
        progress=progress,
    )
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            bench.write_csv(records, fh)
    else:
        bench.write_csv(records, sys.stdout)
    if args.plot and not bench.plot_scaling(records, args.plot):
        print("matplotlib is not installed; skipping the plot", file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="geotransport", description="Geometric transportation solvers.")
    sub = parser.add_subparsers(dest="command", required=True)

    def seed_arg(p: argparse.ArgumentParser) -> None:
        p.add_argument("--seed", type=int, default=None, help=f"random seed (falls back to ${SEED_ENV})")

    gen = sub.add_parser("gen", help="write a random balanced instance")
    gen.add_argument("--n", type=int, required=True, help="total number of points")
    gen.add_argument("--U", "--max-weight", dest="max_weight", type=int, default=10, help="largest weight")
    gen.add_argument("--dist", choices=[d.value for d in Distribution], default="uniform")
    gen.add_argument("--metric", choices=[m.value for m in Metric], default=Metric.L2.value)
    gen.add_argument("-o", "--output", help="instance file (default: standard output)")
    seed_arg(gen)
    gen.set_defaults(func=_cmd_gen)

    solve = sub.add_parser("solve", help="solve an instance file")
    solve.add_argument("instance")
    solve.add_argument("--algo", choices=bench.ALGORITHMS, default="exact")
    solve.add_argument("--eps", type=float, default=None, help="approximation parameter for grid and wspd")
    solve.add_argument("-o", "--output", help="write the plan to this file")
    solve.add_argument("--assume-bounded-spread", action="store_true", help="grid: skip the general-spread machinery")
    solve.add_argument("--check-invariants", action="store_true", help="exact: assert invariants after every step")
    solve.add_argument("--dump-graph", metavar="FILE", help="wspd: write the sparse flow graph as text")
    seed_arg(solve)
    solve.set_defaults(func=_cmd_solve)

    verify = sub.add_parser("verify", help="check a plan file against an instance")
    verify.add_argument("instance")
    verify.add_argument("plan")
    verify.set_defaults(func=_cmd_verify)

    bn = sub.add_parser("bench", help="time solvers over a matrix of sizes and seeds")
    bn.add_argument("--algos", default="oracle,exact", help="comma-separated subset of " + ",".join(bench.ALGORITHMS))
    bn.add_argument("--sizes", default="10,20,40", help="comma-separated values of n")
    bn.add_argument("--seeds", default=None, help="comma-separated seeds (overrides --repeats)")
    bn.add_argument("--repeats", type=int, default=3, help="consecutive seeds starting at --seed")
    bn.add_argument("--eps", type=float, default=None)
    bn.add_argument("--U", "--max-weight", dest="max_weight", type=int, default=10)
    bn.add_argument("--dist", choices=[d.value for d in Distribution], default="uniform")
    bn.add_argument("--metric", choices=[m.value for m in Metric], default=Metric.L2.value)
    bn.add_argument("--jobs", type=int, default=1, help="cells run concurrently on this many threads")
    bn.add_argument("--oracle-limit", type=int, default=bench.DEFAULT_ORACLE_LIMIT, help="largest n compared to the oracle")
    bn.add_argument("--csv", help="CSV output file (default: standard output)")
    bn.add_argument("--plot", help="write a log-log time-vs-n image here")
    bn.add_argument("--quiet", action="store_true")
    seed_arg(bn)
    bn.set_defaults(func=_cmd_bench)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (InfeasibleError, InstanceError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except InvariantViolation as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
