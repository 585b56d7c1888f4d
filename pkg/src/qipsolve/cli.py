"""Command-line entry point.

Exit codes: 0 feasible/optimal, 10 infeasible, 20 unknown or timeout,
2 usage error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path
from typing import Optional

from .bruteforce import GuardExceeded, OracleReport, minimax_feasible
from .cegar import SolveStats, solve_qip
from .fuzzing import check_seed
from .generators import (
    McnBudgets,
    emit_qdimacs_qrandomparity,
    gen_mcn,
    gen_qrandomparity,
    graph_from_edge_list,
    mcn_text,
    qrandomparity_text,
    random_graph,
)
from .ip import Budget, make_external_solver, solve_ip
from .model import QipInstance, validate_instance
from .optimize import optimize, verify_bound
from .parser import ParseError, parse_qip, serialize_qip

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_USAGE = 2
EXIT_INFEASIBLE = 10
EXIT_UNKNOWN = 20


class UsageError(Exception):
    pass


def _build_parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="qipsolve", description=__doc__)
    sub = top.add_subparsers(dest="command", required=True)

    def solver_flags(p):
        p.add_argument("--oracle", choices=["builtin", "external"], default="builtin")
        p.add_argument("--solver-cmd", help="external solver command with {in} and {out} placeholders")
        p.add_argument("--first-move", choices=["bounds", "relax"], default="relax")
        p.add_argument("--time-limit", type=float, metavar="SECS")
        p.add_argument("--stats", choices=["json", "csv", "none"], default="none")
        p.add_argument("--out", metavar="FILE", help="write machine stats (or generated text) here")

    p = sub.add_parser("solve", help="decide a quantified instance")
    p.add_argument("file")
    p.add_argument("--oracle-bruteforce", action="store_true",
                   help="use the exhaustive reference oracle instead of the engine")
    solver_flags(p)

    p = sub.add_parser("optimize", help="binary-search the optimal objective value")
    p.add_argument("file")
    solver_flags(p)

    p = sub.add_parser("verify-bound", help="check whether any strategy beats a bound")
    p.add_argument("file")
    p.add_argument("--bound", type=int, required=True)
    solver_flags(p)

    p = sub.add_parser("generate", help="emit a benchmark instance")
    gsub = p.add_subparsers(dest="family", required=True)
    q = gsub.add_parser("qrandomparity")
    q.add_argument("--n", type=int, required=True)
    q.add_argument("--seed", type=int, default=0)
    q.add_argument("--qdimacs", action="store_true")
    q.add_argument("--out", metavar="FILE")
    m = gsub.add_parser("mcn")
    src = m.add_mutually_exclusive_group(required=True)
    src.add_argument("--graph", metavar="FILE", help="edge list: vertex count, then 'u v' per line")
    src.add_argument("--random", type=int, metavar="N", help="random undirected graph on N vertices")
    m.add_argument("--density", type=float, default=0.05)
    m.add_argument("--seed", type=int, default=0)
    m.add_argument("--omega", type=int, required=True, help="vaccination budget")
    m.add_argument("--phi", type=int, required=True, help="infection budget")
    m.add_argument("--lambda", dest="lam", type=int, required=True, help="protection budget")
    m.add_argument("--out", metavar="FILE")

    p = sub.add_parser("fuzz", help="engine-vs-oracle agreement over a seed range")
    p.add_argument("--seeds", required=True, metavar="A..B")
    p.add_argument("--out", metavar="FILE", help="where to dump a disagreeing instance")

    p = sub.add_parser("bench", help="per-instance CSV over a benchmark family")
    p.add_argument("--family", choices=["qrp", "mcn"], required=True)
    p.add_argument("--seeds", default="0..0", metavar="A..B")
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=8)
    p.add_argument("--nodes", type=int, default=8)
    p.add_argument("--density", type=float, default=0.05)
    p.add_argument("--omega", type=int, default=1)
    p.add_argument("--phi", type=int, default=1)
    p.add_argument("--lambda", dest="lam", type=int, default=1)
    p.add_argument("--time-limit", type=float, metavar="SECS")
    p.add_argument("--out", metavar="FILE")
    return top


def _load_instance(path: str) -> QipInstance:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"no such file: {path}")
    try:
        inst = parse_qip(p.read_text())
    except ParseError as exc:
        raise UsageError(f"{path}: {exc}") from exc
    report = validate_instance(inst)
    if not report.ok:
        lines = "; ".join(f"[{i.kind}] {i.message}" for i in report.issues)
        raise UsageError(f"{path}: instance not admissible: {lines}")
    return inst


def _budget(args) -> Optional[Budget]:
    limit = getattr(args, "time_limit", None)
    if limit is None:
        return None
    if limit <= 0:
        raise UsageError(f"--time-limit must be positive, got {limit}")
    return Budget.time_limit(limit)


def _ip_solver(args):
    if getattr(args, "oracle", "builtin") == "external":
        if not args.solver_cmd:
            raise UsageError("--oracle external requires --solver-cmd")
        return make_external_solver(args.solver_cmd)
    return solve_ip


def _emit_stats(args, stats: SolveStats) -> None:
    if args.stats == "none":
        return
    if args.stats == "json":
        text = json.dumps(stats.as_dict(), sort_keys=True) + "\n"
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        fields = list(stats.as_dict().items())
        writer.writerow([k for k, _ in fields])
        writer.writerow([v for _, v in fields])
        text = buf.getvalue()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _write_output(args, text: str) -> None:
    if getattr(args, "out", None):
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)


def _format_move(inst: QipInstance, move) -> str:
    return " ".join(f"{inst.var(v).name}={move[v]}" for v in sorted(move))


def _cmd_solve(args) -> int:
    inst = _load_instance(args.file)
    if args.oracle_bruteforce:
        report = OracleReport()
        try:
            feasible = minimax_feasible(inst, report=report)
        except GuardExceeded as exc:
            raise UsageError(str(exc)) from exc
        outcome = "feasible" if feasible else "infeasible"
        print(f"outcome: {outcome} (exhaustive oracle)")
        if report.empty_domain_nodes:
            print(f"note: {report.empty_domain_nodes} universal node(s) had an empty "
                  f"restricted domain (counted as existential wins)")
        stats = SolveStats(outcome=outcome)
        _emit_stats(args, stats)
        return EXIT_OK if feasible else EXIT_INFEASIBLE
    outcome, move, stats = solve_qip(inst, ip_solver=_ip_solver(args),
                                     budget=_budget(args), first_move=args.first_move)
    if outcome == "feasible":
        detail = f"winning first move: {_format_move(inst, move)}" if move else \
            "universal player has no winning move"
    elif outcome == "infeasible":
        detail = f"universal winning move: {_format_move(inst, move)}" if move else \
            "no winning first move exists"
    else:
        detail = "budget exhausted"
    print(f"outcome: {outcome}; {detail}")
    print(f"ip_calls={stats.ip_calls} refinements={stats.refinements} "
          f"max_depth={stats.max_depth} wall_ms={stats.wall_ms}")
    _emit_stats(args, stats)
    return {"feasible": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(outcome, EXIT_UNKNOWN)


def _cmd_optimize(args) -> int:
    inst = _load_instance(args.file)
    if inst.objective is None:
        raise UsageError(f"{args.file}: optimize needs an objective (feasibility instance; use solve)")
    stats = SolveStats()
    try:
        result = optimize(inst, ip_solver=_ip_solver(args), budget=_budget(args),
                          first_move=args.first_move, stats=stats)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if result.status == "optimal":
        print(f"optimal value {result.value}; first move {_format_move(inst, result.first_move)}")
    else:
        print(f"outcome: {result.status}" + (f" ({result.reason})" if result.reason else ""))
    print("probes: " + ", ".join(f"{z}:{v}" for z, v in result.probes))
    print(f"ip_calls={stats.ip_calls} refinements_total={stats.refinements_total} "
          f"max_depth={stats.max_depth} wall_ms={stats.wall_ms}")
    _emit_stats(args, stats)
    return {"optimal": EXIT_OK, "infeasible": EXIT_INFEASIBLE}.get(result.status, EXIT_UNKNOWN)


def _cmd_verify_bound(args) -> int:
    inst = _load_instance(args.file)
    if inst.objective is None:
        raise UsageError(f"{args.file}: verify-bound needs an objective")
    stats = SolveStats()
    try:
        result = verify_bound(inst, args.bound, ip_solver=_ip_solver(args),
                              budget=_budget(args), first_move=args.first_move, stats=stats)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if result.status == "proved-optimal":
        print(f"no strategy beats {result.bound}: proved optimal at {result.bound}")
    elif result.status == "better-exists":
        print(f"a strategy strictly better than {result.bound} exists (value not revealed)")
    else:
        print(f"outcome: unknown ({result.reason})")
    _emit_stats(args, stats)
    return EXIT_UNKNOWN if result.status == "unknown" else EXIT_OK


def _cmd_generate(args) -> int:
    if args.family == "qrandomparity":
        if args.n < 2:
            raise UsageError("--n must be at least 2")
        text = emit_qdimacs_qrandomparity(args.n, args.seed) if args.qdimacs \
            else qrandomparity_text(args.n, args.seed)
        _write_output(args, text)
        return EXIT_OK
    if args.graph:
        path = Path(args.graph)
        if not path.exists():
            raise UsageError(f"no such file: {args.graph}")
        try:
            graph = graph_from_edge_list(path.read_text())
        except ValueError as exc:
            raise UsageError(f"{args.graph}: {exc}") from exc
        note = f"source={args.graph}"
    else:
        graph = random_graph(args.random, args.density, args.seed)
        note = f"density={args.density} seed={args.seed}"
    try:
        budgets = McnBudgets(args.omega, args.phi, args.lam)
        text = mcn_text(graph, budgets, note)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    _write_output(args, text)
    return EXIT_OK


def _parse_seed_range(spec: str) -> range:
    try:
        a, b = spec.split("..", 1)
        lo, hi = int(a), int(b)
    except ValueError as exc:
        raise UsageError(f"bad seed range {spec!r}; expected A..B") from exc
    if hi < lo:
        raise UsageError(f"empty seed range {spec!r}")
    return range(lo, hi + 1)


def _cmd_fuzz(args) -> int:
    seeds = _parse_seed_range(args.seeds)
    checks = 0
    for seed in seeds:
        outcome, inst = check_seed(seed)
        checks += outcome.checks
        if not outcome.ok:
            dump = args.out or f"fuzz_failure_seed{seed}.qip"
            Path(dump).write_text(serialize_qip(inst))
            for line in outcome.disagreements:
                print(f"seed {seed}: {line}")
            print(f"offending instance written to {dump}")
            return EXIT_INTERNAL
    print(f"{len(seeds)} seeds, {checks} checks, 0 disagreements")
    return EXIT_OK


def _cmd_bench(args) -> int:
    budget = _budget(args)
    rows = [["family", "params", "seed", "outcome", "wall_ms", "ip_calls", "refinements"]]
    for seed in _parse_seed_range(args.seeds):
        if args.family == "qrp":
            for n in range(args.n_min, args.n_max + 1):
                inst = gen_qrandomparity(n, seed)
                outcome, _, stats = solve_qip(inst, budget=budget)
                rows.append(["qrp", f"n={n}", seed, outcome,
                             stats.wall_ms, stats.ip_calls, stats.refinements])
        else:
            graph = random_graph(args.nodes, args.density, seed)
            inst = gen_mcn(graph, McnBudgets(args.omega, args.phi, args.lam))
            stats = SolveStats()
            result = optimize(inst, budget=budget, stats=stats)
            rows.append(["mcn", f"nodes={args.nodes} density={args.density} "
                                f"omega={args.omega} phi={args.phi} lambda={args.lam}",
                         seed, result.status, stats.wall_ms, stats.ip_calls,
                         stats.refinements_total])
    buf = io.StringIO()
    csv.writer(buf).writerows(rows)
    _write_output(args, buf.getvalue())
    return EXIT_OK


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    handlers = {
        "solve": _cmd_solve,
        "optimize": _cmd_optimize,
        "verify-bound": _cmd_verify_bound,
        "generate": _cmd_generate,
        "fuzz": _cmd_fuzz,
        "bench": _cmd_bench,
    }
    try:
        return handlers[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # noqa: BLE001 - last-resort boundary
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
