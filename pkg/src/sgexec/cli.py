"""Command-line surface: corpus generation, experiment runs, inspection.

Subcommands: gen-graphs, run, bench, curve, inspect. All runs with fixed
seeds produce byte-identical output files; wall-clock timings go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import _kernels, bench, generate, grprop
from .graphs import SubtaskGraph, compute_eligibility
from .policies import PolicyId


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--freeze-stochastic", action="store_true",
        help="disable stochastic object motion (required for optimal baselines)",
    )
    p.add_argument("--map-size", type=int, default=10, help="square map side length")
    p.add_argument("--domain", choices=["playground", "mining"], default=None,
                   help="override the corpus domain (default: manifest / labels)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="sgexec",
        description="Subtask-graph execution benchmarks: generation, policies, search.",
    )
    ap.add_argument("--freeze-stochastic", action="store_true", dest="freeze_global",
                    help=argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-graphs", help="generate a graph corpus")
    g.add_argument("--preset", required=True,
                   help="generator preset (D1..D4, Base variants) or 'Mining'")
    g.add_argument("--count", type=int, default=None,
                   help="number of graphs (default 500; Mining default 640)")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output directory")

    r = sub.add_parser("run", help="evaluate one policy over a corpus")
    r.add_argument("--graphs", required=True)
    r.add_argument("--policy", required=True,
                   help="random | greedy | grprop | optimal | mcts | mcts+grprop")
    r.add_argument("--episodes", type=int, default=16)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", required=True)
    r.add_argument("--optimal-guard", type=int, default=13)
    r.add_argument("--mcts-iterations", type=int, default=None)
    r.add_argument("--mcts-steps", type=int, default=None)
    r.add_argument("--workers", type=int, default=1)
    _add_common(r)

    b = sub.add_parser("bench", help="evaluate several policies with normalization")
    b.add_argument("--graphs", required=True)
    b.add_argument("--policies", required=True,
                   help="comma-separated tags, e.g. random,greedy,grprop,optimal")
    b.add_argument("--episodes", type=int, default=16)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out", required=True)
    b.add_argument("--optimal-guard", type=int, default=13)
    b.add_argument("--mcts-iterations", type=int, default=None)
    b.add_argument("--mcts-steps", type=int, default=None)
    b.add_argument("--workers", type=int, default=1)
    _add_common(b)

    c = sub.add_parser("curve", help="MCTS return vs simulated-step budget")
    c.add_argument("--graphs", required=True)
    c.add_argument("--mcts-budgets", required=True,
                   help="comma-separated per-decision simulated-step budgets, e.g. 1e3,1e4,1e5")
    c.add_argument("--guide", choices=["none", "grprop"], default="none")
    c.add_argument("--episodes", type=int, default=2)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--out", required=True)
    c.add_argument("--optimal-guard", type=int, default=20)
    c.add_argument("--limit", type=int, default=None, help="use only the first N graphs")
    _add_common(c)

    i = sub.add_parser("inspect", help="print a graph's structure and initial scores")
    i.add_argument("--graph", required=True, help="graph file")
    i.add_argument("--domain", choices=["playground", "mining"], default=None)

    return ap


def _policy_ids(tags: str, args) -> list[PolicyId]:
    out = []
    for tag in tags.split(","):
        tag = tag.strip()
        cfg = {}
        if tag in ("mcts", "mcts+grprop"):
            cfg["iteration_budget"] = args.mcts_iterations
            cfg["simulated_step_budget"] = args.mcts_steps
            if cfg["iteration_budget"] is None and cfg["simulated_step_budget"] is None:
                cfg["iteration_budget"] = 100
        out.append(PolicyId(tag, cfg))
    return out


def _cmd_gen_graphs(args) -> int:
    out = Path(args.out)
    if args.preset == "Mining":
        count = args.count or 640
        rng = np.random.default_rng(args.seed)
        template = generate.mining_template()
        graphs = generate.enumerate_mining_subgraphs(template, rng, count=count)
        ids = [f"Mining-{k:04d}" for k in range(len(graphs))]
        n_train = min(200, len(graphs) * 200 // 640) or min(200, len(graphs))
        split = {"train": ids[:n_train], "test": ids[n_train:]}
        bench.save_corpus(graphs, out, "mining", "Mining", args.seed, split=split)
    else:
        params = generate.preset(args.preset)
        count = args.count or 500
        graphs = []
        for k in range(count):
            rng = np.random.default_rng((args.seed, k))
            graphs.append(generate.generate_playground_graph(params, rng))
        bench.save_corpus(graphs, out, "playground", args.preset, args.seed)
    print(f"wrote {len(graphs)} graphs to {out}", file=sys.stderr)
    return 0


def _freeze(args) -> bool:
    return bool(getattr(args, "freeze_stochastic", False) or getattr(args, "freeze_global", False))


def _cmd_run(args) -> int:
    domain, corpus = bench.load_corpus(args.graphs, args.domain)
    pids = _policy_ids(args.policy, args)
    t0 = time.perf_counter()
    rows = bench.run_bench(
        corpus, pids, episodes_per_graph=args.episodes, seed=args.seed,
        domain=domain, freeze=_freeze(args), map_size=args.map_size,
        optimal_guard=args.optimal_guard, workers=args.workers,
    )
    Path(args.out).write_text(bench.bench_rows_to_csv(rows))
    bench.write_run_manifest(
        Path(args.out).with_suffix(".manifest.json"),
        command="run", graphs=str(args.graphs), domain=domain,
        policies=[p.tag for p in pids], episodes=args.episodes, seed=args.seed,
        freeze_stochastic=_freeze(args), map_size=args.map_size,
        episode_seed_rule="splitmix64(corpus_seed, graph_index, episode_index)",
    )
    print(f"{len(rows)} rows in {time.perf_counter() - t0:.2f}s -> {args.out}", file=sys.stderr)
    return 0


def _cmd_bench(args) -> int:
    domain, corpus = bench.load_corpus(args.graphs, args.domain)
    pids = _policy_ids(args.policies, args)
    t0 = time.perf_counter()
    rows = bench.run_bench(
        corpus, pids, episodes_per_graph=args.episodes, seed=args.seed,
        domain=domain, freeze=_freeze(args), map_size=args.map_size,
        optimal_guard=args.optimal_guard, workers=args.workers,
    )
    Path(args.out).write_text(bench.bench_rows_to_csv(rows))
    bench.write_run_manifest(
        Path(args.out).with_suffix(".manifest.json"),
        command="bench", graphs=str(args.graphs), domain=domain,
        policies=[p.tag for p in pids], episodes=args.episodes, seed=args.seed,
        freeze_stochastic=_freeze(args), map_size=args.map_size,
        episode_seed_rule="splitmix64(corpus_seed, graph_index, episode_index)",
    )
    print(f"{len(rows)} rows in {time.perf_counter() - t0:.2f}s -> {args.out}", file=sys.stderr)
    return 0


def _cmd_curve(args) -> int:
    domain, corpus = bench.load_corpus(args.graphs, args.domain)
    if args.limit:
        corpus = corpus[: args.limit]
    budgets = [int(float(b)) for b in args.mcts_budgets.split(",")]
    t0 = time.perf_counter()
    rows = bench.run_curve(
        corpus, budgets, guide=args.guide, episodes_per_graph=args.episodes,
        seed=args.seed, domain=domain, freeze=True, map_size=args.map_size,
        optimal_guard=args.optimal_guard,
    )
    Path(args.out).write_text(bench.curve_rows_to_csv(rows))
    bench.write_run_manifest(
        Path(args.out).with_suffix(".manifest.json"),
        command="curve", graphs=str(args.graphs), domain=domain, guide=args.guide,
        step_budgets=budgets, episodes=args.episodes, seed=args.seed,
        freeze_stochastic=True, map_size=args.map_size,
    )
    print(f"{len(rows)} rows in {time.perf_counter() - t0:.2f}s -> {args.out}", file=sys.stderr)
    return 0


def _cmd_inspect(args) -> int:
    from .domains import MINING_BY_LETTER, infer_domain

    graph = SubtaskGraph.loads(Path(args.graph).read_text())
    domain = args.domain or infer_domain(s.label for s in graph.subtasks)
    smooth = grprop.DEFAULT_SMOOTH[domain]
    x0 = (0,) * graph.n_subtasks
    elig = compute_eligibility(graph, x0)
    scores = grprop.grprop_scores(graph, x0, smooth)
    distractors = graph.distractors()
    print(f"domain: {domain}   subtasks: {graph.n_subtasks}   "
          f"and-nodes: {len(graph.and_nodes)}   budget: {graph.step_budget_range}")
    print(f"kernel backend: {_kernels.BACKEND}")
    for s in graph.subtasks:
        pre = " | ".join(
            " & ".join(
                ("!" if neg else "") + graph.subtasks[c].label
                for c, neg in graph.and_node(aid).children
            )
            for aid in graph.or_children[s.id]
        ) or "(always)"
        name = s.label
        if domain == "mining" and s.label in MINING_BY_LETTER:
            name = f"{s.label} ({MINING_BY_LETTER[s.label].name})"
        flags = " [distractor]" if s.id in distractors else ""
        print(f"  [{s.id:2d}] {name:<24} layer {s.layer}  r={s.reward:+.3f}  "
              f"e0={elig[s.id]}  score0={scores[s.id]:+.4f}{flags}")
        print(f"       <- {pre}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "gen-graphs":
            return _cmd_gen_graphs(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "curve":
            return _cmd_curve(args)
        if args.command == "inspect":
            return _cmd_inspect(args)
    except (generate.GenerationError, bench.DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
