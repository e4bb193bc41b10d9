"""Command line front end: solve, oracle, generate, bench."""

from __future__ import annotations

import argparse
import json
import math
import signal
import sys
import time
from pathlib import Path

from . import report as report_mod
from .anytime import (
    BudgetExhaustedError,
    SolverConfig,
    anytime_inference,
    gap,
    prepare_inputs,
)
from .generators import GeneratorError, gen_grid, gen_knapsack
from .model import (
    MmapProblem,
    QueryFormatError,
    UaiFormatError,
    assignment_value,
    dump_query,
    dump_uai,
    load_evidence,
    load_query,
    load_uai,
)
from .oracle import OracleCapError, brute_force_mmap

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INTERRUPTED = 2

_CONFIG_KEYS = ("k_init", "c", "growth", "time_limit", "memory_cap", "convexity", "convexity_limit")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse's default exit code for usage errors is 2, which this tool reserves
    # for "interrupted with valid bounds"; route usage problems to exit code 1
    def error(self, message):
        raise _UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="margmap", description="Anytime bounds for marginal MAP queries on discrete graphical models.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="tighten lower/upper bounds until they meet or a budget runs out")
    s.add_argument("--model", required=True, help="model file (UAI format)")
    s.add_argument("--query", required=True, help="query file naming the decision variables")
    s.add_argument("--evid", help="optional evidence file")
    s.add_argument("--k-init", type=int, default=1, dest="k_init", help="initial per-node member cap")
    s.add_argument("--c", type=int, default=2, help="cap growth increment per refinement step")
    s.add_argument("--growth", choices=["worst", "all"], default="worst", help="grow only the worst node or all nodes")
    s.add_argument("--time-limit", type=float, default=None, dest="time_limit", help="seconds; the first pass always completes")
    s.add_argument("--memory-cap", type=int, default=None, dest="memory_cap", help="byte budget for live member tables")
    s.add_argument("--max-children", type=int, default=2, dest="max_children", help="tree branching limit before copy nodes are inserted")
    s.add_argument("--convexity", action="store_true", help="also prune members inside the convex hull of their peers")
    s.add_argument("--convexity-limit", type=int, default=64, dest="convexity_limit", help="skip the convexity filter above this set size")
    s.add_argument("--verify", action="store_true", help="re-evaluate the reported assignment by exact elimination")
    s.add_argument("--output", help="path prefix: writes <prefix>.json, <prefix>.trace.csv and <prefix>.png")
    s.set_defaults(func=_cmd_solve)

    o = sub.add_parser("oracle", help="exhaustive reference answer for small instances")
    o.add_argument("--model", required=True)
    o.add_argument("--query", required=True)
    o.add_argument("--evid")
    o.add_argument("--cap", type=int, default=1 << 24, help="max decision states x free states")
    o.add_argument("--output", help="write the JSON answer here instead of stdout")
    o.set_defaults(func=_cmd_oracle)

    g = sub.add_parser("generate", help="write a random benchmark instance")
    gs = g.add_subparsers(dest="kind", required=True)
    gg = gs.add_parser("grid", help="lattice with border (or second-plane) decisions")
    gg.add_argument("--rows", type=int, required=True)
    gg.add_argument("--cols", type=int, required=True)
    gg.add_argument("--planes", type=int, default=1, choices=[1, 2])
    gg.add_argument("--states", type=int, default=2)
    gg.add_argument("--seed", type=int, default=0)
    gg.add_argument("--output", required=True, help="path prefix for .uai/.query/.meta.json")
    gg.set_defaults(func=_cmd_generate)
    gk = gs.add_parser("knapsack", help="multi-bag packing chain")
    gk.add_argument("--bags", type=int, required=True)
    gk.add_argument("--items", type=int, required=True)
    gk.add_argument("--seed", type=int, default=0)
    gk.add_argument("--capacity", type=int, default=None)
    gk.add_argument("--output", required=True, help="path prefix for .uai/.query/.meta.json")
    gk.set_defaults(func=_cmd_generate)

    b = sub.add_parser("bench", help="solve a list of instances and collect traces")
    b.add_argument("--spec", required=True, help="JSON file listing instances and config overrides")
    b.add_argument("--output-dir", required=True, dest="output_dir")
    b.set_defaults(func=_cmd_bench)
    return p


def _load_problem(args) -> MmapProblem:
    with open(args.model) as fh:
        model = load_uai(fh)
    with open(args.query) as fh:
        decisions, evidence = load_query(fh, model)
    evid_path = getattr(args, "evid", None)
    if evid_path:
        with open(evid_path) as fh:
            extra = load_evidence(fh, model)
        conflicts = {v for v in set(extra) & set(evidence) if extra[v] != evidence[v]}
        if conflicts:
            raise QueryFormatError(
                f"evidence file conflicts with the query on variables {sorted(conflicts)}"
            )
        evidence = {**evidence, **extra}
    return MmapProblem(model, decisions, evidence)


def _cmd_solve(args) -> int:
    problem = _load_problem(args)
    config = SolverConfig(
        k_init=args.k_init,
        c=args.c,
        growth=args.growth,
        time_limit=args.time_limit,
        memory_cap=args.memory_cap,
        convexity=args.convexity,
        convexity_limit=args.convexity_limit,
    )
    tree, family = prepare_inputs(problem, max_children=args.max_children)

    interrupted = {"flag": False}

    def on_sigint(signum, frame):
        interrupted["flag"] = True

    previous = signal.signal(signal.SIGINT, on_sigint)
    start = time.perf_counter()
    try:
        result = anytime_inference(tree, family, config, interrupt=lambda: interrupted["flag"])
    finally:
        signal.signal(signal.SIGINT, previous)
    elapsed = time.perf_counter() - start

    verification = None
    if args.verify:
        recomputed = assignment_value(problem, result.assignment)
        rel = abs(recomputed.ratio_to(result.z_lower) - 1.0)
        verification = {
            "recomputed_lower": report_mod.scaled_payload(recomputed),
            "relative_error": rel if math.isfinite(rel) else None,
            "ok": rel <= 1e-9,
        }

    problem_info = {
        "model": args.model,
        "query": args.query,
        "evidence_file": args.evid,
        "n_vars": problem.model.n_vars,
        "n_factors": len(problem.model.factors),
        "n_decisions": len(problem.decisions),
        "n_evidence": len(problem.evidence),
        "tree_nodes": len(tree.nodes),
        "tree_width": tree.width(),
    }
    doc = report_mod.build_report(
        problem_info=problem_info,
        config=config,
        result=result,
        elapsed=elapsed,
        verification=verification,
    )
    text = report_mod.dump_report(doc)
    if args.output:
        base = Path(args.output)
        base.parent.mkdir(parents=True, exist_ok=True)
        report_path = Path(str(base) + ".json")
        trace_path = Path(str(base) + ".trace.csv")
        figure_path = Path(str(base) + ".png")
        report_path.write_text(text)
        report_mod.write_trace_csv(trace_path, result.trace)
        report_mod.render_bounds_figure(figure_path, result.trace, title=Path(args.model).name)
        lo, up = result.z_lower.normalized(), result.z_upper.normalized()
        line = f"{result.status}" + (f" ({result.detail})" if result.detail else "")
        print(f"status: {line} after {result.steps} step(s), {elapsed:.3f}s")
        print(f"bounds: [{lo.mantissa:.12g}*2^{lo.exponent}, {up.mantissa:.12g}*2^{up.exponent}]")
        print(f"wrote {report_path}, {trace_path}, {figure_path}")
    else:
        sys.stdout.write(text)

    if verification is not None and not verification["ok"]:
        print("verification failed: exact re-evaluation disagrees with the reported lower bound", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_OK if result.status == "converged" else EXIT_INTERRUPTED


def _cmd_oracle(args) -> int:
    problem = _load_problem(args)
    value, assignments = brute_force_mmap(problem, cap=args.cap)
    doc = {
        "value": report_mod.scaled_payload(value),
        "n_optimal": len(assignments),
        "assignments": [[[v, s] for v, s in sorted(a.items())] for a in assignments],
    }
    text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    if args.output:
        Path(args.output).write_text(text)
        print(f"wrote {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_generate(args) -> int:
    if args.kind == "grid":
        problem, meta = gen_grid(args.rows, args.cols, args.planes, args.states, args.seed)
    else:
        problem, meta = gen_knapsack(args.bags, args.items, args.seed, args.capacity)
    prefix = Path(args.output)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    uai_path = Path(str(prefix) + ".uai")
    query_path = Path(str(prefix) + ".query")
    meta_path = Path(str(prefix) + ".meta.json")
    uai_path.write_text(dump_uai(problem.model))
    query_path.write_text(dump_query(problem.decisions, problem.evidence))
    meta = {**meta, "model_file": uai_path.name, "query_file": query_path.name}
    meta_path.write_text(json.dumps(meta, sort_keys=True, indent=2) + "\n")
    print(f"wrote {uai_path}, {query_path}, {meta_path}")
    return EXIT_OK


def _bench_problem(inst: dict) -> tuple[MmapProblem, dict]:
    generator = inst.get("generator")
    if generator == "grid":
        return gen_grid(
            inst["rows"], inst["cols"], inst.get("planes", 1), inst.get("states", 2), inst.get("seed", 0)
        )
    if generator == "knapsack":
        return gen_knapsack(
            inst["bags"], inst["items"], inst.get("seed", 0), inst.get("capacity")
        )
    if generator is not None:
        raise GeneratorError(f"unknown generator {generator!r}")

    class _FileArgs:
        model = inst["model"]
        query = inst["query"]
        evid = inst.get("evid")

    problem = _load_problem(_FileArgs)
    return problem, {"kind": "files", "model": inst["model"], "query": inst["query"]}


def _cmd_bench(args) -> int:
    with open(args.spec) as fh:
        spec = json.load(fh)
    outdir = Path(args.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    defaults = spec.get("defaults", {})
    rows: list[dict] = []
    n_ok = 0
    instances = spec.get("instances", [])
    for pos, inst in enumerate(instances):
        name = inst.get("name", f"instance{pos}")
        try:
            problem, meta = _bench_problem(inst)
            merged = {**defaults, **inst}
            config = SolverConfig(**{k: merged[k] for k in _CONFIG_KEYS if k in merged})
            tree, family = prepare_inputs(problem, max_children=merged.get("max_children", 2))
            start = time.perf_counter()
            result = anytime_inference(tree, family, config)
            elapsed = time.perf_counter() - start
            doc = report_mod.build_report(
                problem_info={"name": name, **meta},
                config=config,
                result=result,
                elapsed=elapsed,
            )
            (outdir / f"{name}.json").write_text(report_mod.dump_report(doc))
            report_mod.write_trace_csv(outdir / f"{name}.trace.csv", result.trace)
            report_mod.render_bounds_figure(outdir / f"{name}.png", result.trace, title=name)
            for t in result.trace:
                rows.append(
                    {
                        "instance": name,
                        "step": t.step,
                        "wall_clock": f"{t.wall_clock:.6f}",
                        "lower_value": repr(t.z_lower.to_float()),
                        "upper_value": repr(t.z_upper.to_float()),
                        "gap": repr(gap(t)),
                        "status": result.status,
                    }
                )
            n_ok += 1
            print(f"{name}: {result.status} in {result.steps} step(s), {elapsed:.3f}s")
        except Exception as exc:  # a broken instance must not kill the batch
            rows.append(
                {"instance": name, "step": "", "wall_clock": "", "lower_value": "",
                 "upper_value": "", "gap": "", "status": f"error: {exc}"}
            )
            print(f"{name}: failed ({exc})", file=sys.stderr)
    report_mod.write_bench_csv(outdir / "bench.csv", rows)
    print(f"wrote {outdir / 'bench.csv'}: {n_ok}/{len(instances)} instances solved")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (UaiFormatError, QueryFormatError, GeneratorError, OracleCapError,
            BudgetExhaustedError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
