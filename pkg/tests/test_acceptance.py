"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
summary lines. Thresholds and tolerances are pinned here; the trend
criteria run frozen-stochastic so the optimal baseline is a true
per-instance upper bound.
"""

import itertools
import subprocess
import sys
import time
from collections import defaultdict

import numpy as np
import pytest

from conftest import fig7_style_graph, small_graph
from oracles import enumerate_best_return, fd_jacobian, sop_eligibility
from sgexec import _kernels
from sgexec._kernels import pack as packmod
from sgexec.bench import run_bench, run_curve
from sgexec.generate import (
    enumerate_mining_subgraphs,
    generate_playground_graph,
    mining_template,
    preset,
)
from sgexec.graphs import TaskState, compute_eligibility
from sgexec.grprop import PLAYGROUND_SMOOTH, grprop_policy, grprop_scores, smoothed_eligibility
from sgexec.mcts import MctsConfig, mcts_plan
from sgexec.policies import PolicyId, greedy_policy, optimal_search
from sgexec.world import EpisodeConfig, episode_setup


def _report(criterion: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    print(f"[acceptance] criterion {criterion:>2}: {status}  {detail}")
    assert passed, f"criterion {criterion}: {detail}"


def _norm_means(corpus, policies, episodes, seed=0, guard=20, workers=4):
    rows = run_bench(
        corpus, policies, episodes_per_graph=episodes, seed=seed, freeze=True,
        optimal_guard=guard, workers=workers,
    )
    agg = defaultdict(list)
    for r in rows:
        if r.normalized is not None:
            agg[r.policy].append(r.normalized)
    return {tag: float(np.mean(v)) for tag, v in agg.items()}


def test_criterion_1_eligibility_oracle_equivalence():
    t0 = time.perf_counter()
    n_graphs = 0
    n_vectors = 0
    seed = 0
    while n_graphs < 1000:
        g = small_graph(seed)
        seed += 1
        if g.n_subtasks > 10:
            continue
        n_graphs += 1
        for x in itertools.product((0, 1), repeat=g.n_subtasks):
            assert compute_eligibility(g, x) == sop_eligibility(g, x)
            n_vectors += 1
    dt = time.perf_counter() - t0
    _report(1, dt < 60.0, f"{n_graphs} graphs, {n_vectors} completion vectors, exact, {dt:.1f}s")


def test_criterion_2_gradient_matches_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1234)
    worst = 0.0
    for k in range(100):
        g = generate_playground_graph(preset("D1"), np.random.default_rng((9000, k)))
        for _ in range(10):
            x = rng.uniform(0.05, 0.95, g.n_subtasks)
            ev = smoothed_eligibility(g, x, PLAYGROUND_SMOOTH, with_gradient=True)
            fd = np.asarray(fd_jacobian(g, x, PLAYGROUND_SMOOTH, h=1e-5))
            rel = np.abs(ev.jacobian - fd) / np.maximum(np.abs(fd), 1e-8)
            worst = max(worst, float(rel.max()))
    dt = time.perf_counter() - t0
    _report(2, worst < 1e-6, f"max relative error {worst:.2e} over 100 D1 graphs x 10 points, {dt:.0f}s")


def test_criterion_3_optimal_equals_unpruned_enumeration():
    t0 = time.perf_counter()
    checked = 0
    seed = 0
    while checked < 200:
        g = small_graph(seed)
        seed += 1
        if g.n_subtasks > 8:
            continue
        cfg = EpisodeConfig("playground", g, seed=seed, freeze_stochastic=True)
        budget, map_spec, _p, _m = episode_setup(cfg)
        budget = min(budget, 12)
        pack = packmod.build_simpack(cfg, map_spec)
        best, _seq, _n = _kernels.optimal_search(pack, packmod.initial_state(pack, budget))
        oracle = enumerate_best_return(pack, packmod.initial_state(pack, budget))
        assert best == oracle, f"instance seed {seed}: {best} != oracle {oracle}"
        checked += 1
    dt = time.perf_counter() - t0
    _report(3, checked >= 200 and dt < 300, f"{checked} frozen instances, exact equality, {dt:.0f}s")


def test_criterion_4_playground_zero_shot_trend():
    t0 = time.perf_counter()
    graphs = [
        generate_playground_graph(preset("D1"), np.random.default_rng((42, k)))
        for k in range(100)
    ]
    corpus = [(f"D1-{k:04d}", g) for k, g in enumerate(graphs)]
    means = _norm_means(
        corpus, [PolicyId(t) for t in ("random", "greedy", "grprop", "optimal")], 8
    )
    gap = means["grprop"] - means["greedy"]
    dt = time.perf_counter() - t0
    ok = gap >= 0.30 and means["grprop"] >= 0.50 and dt < 600
    _report(
        4, ok,
        f"R(grprop)={means['grprop']:.3f} (>=0.50), R(greedy)={means['greedy']:.3f}, "
        f"gap={gap:.3f} (>=0.30), {dt:.0f}s",
    )


def test_criterion_5_generalization_ladder():
    t0 = time.perf_counter()
    ladder = {}
    for name, count in (("D1", 60), ("D2", 60), ("D3", 60), ("D4", 60)):
        graphs = [
            generate_playground_graph(preset(name), np.random.default_rng((42, k)))
            for k in range(count)
        ]
        corpus = [(f"{name}-{k:04d}", g) for k, g in enumerate(graphs)]
        means = _norm_means(
            corpus, [PolicyId(t) for t in ("random", "grprop", "optimal")], 6
        )
        ladder[name] = means["grprop"]
    dt = time.perf_counter() - t0
    seq = [ladder[n] for n in ("D1", "D2", "D3", "D4")]
    monotone = all(b <= a + 0.05 for a, b in zip(seq, seq[1:]))
    ok = monotone and ladder["D4"] >= 0.25 and dt < 900
    _report(
        5, ok,
        "R(grprop) " + " -> ".join(f"{v:.3f}" for v in seq)
        + f" (monotone within +0.05; D4 >= 0.25), {dt:.0f}s",
    )


def test_criterion_6_mining_raw_return_ordering():
    t0 = time.perf_counter()
    template = mining_template()
    subgraphs = enumerate_mining_subgraphs(template, np.random.default_rng(0), count=640)
    test_split = subgraphs[200:]
    corpus = [(f"M-{k:04d}", g) for k, g in enumerate(test_split[:150])]
    rows = run_bench(
        corpus, [PolicyId(t) for t in ("random", "greedy", "grprop")],
        episodes_per_graph=6, seed=0, domain="mining", freeze=True, workers=4,
    )
    agg = defaultdict(list)
    for r in rows:
        agg[r.policy].append(r.mean_return)
    means = {t: float(np.mean(v)) for t, v in agg.items()}
    gap1 = means["grprop"] - means["greedy"]
    gap2 = means["greedy"] - means["random"]
    dt = time.perf_counter() - t0
    ok = gap1 >= 1.0 and gap2 >= 0.3 and dt < 600
    _report(
        6, ok,
        f"raw means grprop={means['grprop']:.2f} > greedy={means['greedy']:.2f} > "
        f"random={means['random']:.2f}; gaps {gap1:.2f} (>=1.0), {gap2:.2f} (>=0.3), {dt:.0f}s",
    )


def test_criterion_7_distractor_and_delayed_reward():
    t0 = time.perf_counter()
    g = fig7_style_graph()
    state = TaskState.initial(g, 30)
    greedy_first = greedy_policy(g, state)
    grprop_first = grprop_policy(g, state, PLAYGROUND_SMOOTH)
    distractors = g.distractors()
    exact_ok = greedy_first in distractors and grprop_first not in distractors

    graphs = [
        generate_playground_graph(preset("Base+Delayed"), np.random.default_rng((42, k)))
        for k in range(50)
    ]
    corpus = [(f"BD-{k:04d}", g2) for k, g2 in enumerate(graphs)]
    means = _norm_means(
        corpus, [PolicyId(t) for t in ("random", "greedy", "grprop", "optimal")], 8
    )
    gap = means["grprop"] - means["greedy"]
    dt = time.perf_counter() - t0
    ok = exact_ok and gap >= 0.3 and dt < 300
    _report(
        7, ok,
        f"greedy first={greedy_first} (distractor), grprop first={grprop_first} "
        f"(enabler); delayed gap={gap:.3f} (>=0.3), {dt:.0f}s",
    )


def test_criterion_8_mcts_properties():
    t0 = time.perf_counter()
    # (a) return non-decreasing in the simulated-step budget
    graphs = [
        generate_playground_graph(preset("D2"), np.random.default_rng((7, k)))
        for k in range(20)
    ]
    corpus = [(f"D2-{k:04d}", g) for k, g in enumerate(graphs)]
    rows = run_curve(
        corpus, [1_000, 10_000, 100_000], guide="none", episodes_per_graph=2,
        seed=0, optimal_guard=20,
    )
    by_budget = defaultdict(list)
    for r in rows:
        by_budget[r.step_budget].append(r.normalized)
    curve = [float(np.mean(by_budget[b])) for b in (1_000, 10_000, 100_000)]
    monotone = all(b >= a - 0.02 for a, b in zip(curve, curve[1:]))

    # (b) GRProp-guided MCTS beats plain MCTS at 1e3 iterations
    graphs_b = [
        generate_playground_graph(preset("D2"), np.random.default_rng((7, k)))
        for k in range(50)
    ]
    corpus_b = [(f"D2-{k:04d}", g) for k, g in enumerate(graphs_b)]
    means = _norm_means(
        corpus_b,
        [
            PolicyId("random"), PolicyId("optimal"),
            PolicyId("mcts", {"iteration_budget": 1000}),
            PolicyId("mcts+grprop", {"iteration_budget": 1000}),
        ],
        2,
    )
    guided_gap = means["mcts+grprop"] - means["mcts"]

    # (c) exact optimality on tiny instances at 1e4 iterations
    from sgexec.graphs import SubtaskGraph, SubtaskSpec

    exact = True
    rng = np.random.default_rng(5)
    for k in range(10):
        rewards = [float(r) for r in rng.uniform(0.1, 1.0, 3)]
        types = ["Egg", "Cow", "Milk"]
        subtasks = tuple(
            SubtaskSpec(i, f"pickup:{types[i]}", 0, rewards[i]) for i in range(3)
        )
        g3 = SubtaskGraph(3, subtasks, (), ((), (), ()), (9, 14))
        cfg = EpisodeConfig("playground", g3, seed=500 + k, freeze_stochastic=True)
        best, _seq = optimal_search(cfg)
        rec, _diag = mcts_plan(cfg, MctsConfig(iteration_budget=10_000))
        if abs(rec.total_return - best) > 1e-12:
            exact = False
    dt = time.perf_counter() - t0
    ok = monotone and guided_gap >= 0.10 and exact and dt < 1800
    _report(
        8, ok,
        f"(a) curve {' -> '.join(f'{v:.3f}' for v in curve)} (non-decreasing -0.02); "
        f"(b) guided gap {guided_gap:.3f} (>=0.10); (c) 10/10 tiny instances exact; {dt:.0f}s",
    )


def test_criterion_9_performance():
    # grprop decision latency on a 16-subtask graph
    g = generate_playground_graph(preset("D4"), np.random.default_rng(3))
    assert g.n_subtasks == 16
    state = TaskState.initial(g, 50)
    grprop_scores(g, state, PLAYGROUND_SMOOTH)  # warm the caches
    n = 200
    t0 = time.perf_counter()
    for _ in range(n):
        grprop_scores(g, state, PLAYGROUND_SMOOTH)
    per_decision_ms = (time.perf_counter() - t0) / n * 1e3

    # MCTS simulated-step throughput
    cfg = EpisodeConfig("playground", g, seed=1, freeze_stochastic=True)
    t0 = time.perf_counter()
    _rec, diag = mcts_plan(cfg, MctsConfig(simulated_step_budget=20_000))
    steps_per_sec = diag["simulated_steps"] / (time.perf_counter() - t0)
    ok = per_decision_ms <= 1.0 and steps_per_sec >= 10_000
    _report(
        9, ok,
        f"grprop {per_decision_ms:.3f} ms/decision (<=1 ms) on 16 subtasks; "
        f"MCTS {steps_per_sec:,.0f} simulated steps/s (>=10,000)",
    )


def test_criterion_10_cli_determinism(tmp_path):
    t0 = time.perf_counter()

    def cli(*argv):
        proc = subprocess.run(
            [sys.executable, "-m", "sgexec.cli", *argv], capture_output=True, text=True
        )
        assert proc.returncode == 0, proc.stderr
        return proc

    root = tmp_path
    commands = [
        ("gen-graphs", "--preset", "D1", "--count", "3", "--seed", "17",
         "--out", str(root / "graphs")),
        ("bench", "--graphs", str(root / "graphs"),
         "--policies", "random,greedy,grprop,optimal", "--episodes", "4",
         "--seed", "3", "--freeze-stochastic", "--out", str(root / "table.csv")),
        ("curve", "--graphs", str(root / "graphs"), "--mcts-budgets", "300,900",
         "--guide", "grprop", "--episodes", "1", "--seed", "2",
         "--optimal-guard", "16", "--out", str(root / "curve.csv")),
    ]

    def snapshot():
        blob = b""
        for f in sorted(root.rglob("*")):
            if f.is_file():
                blob += f.name.encode() + b"\0" + f.read_bytes() + b"\0"
        return blob

    identical = True
    for cmd in commands:
        cli(*cmd)
        first = snapshot()
        cli(*cmd)
        identical = identical and snapshot() == first
    dt = time.perf_counter() - t0
    _report(
        10, identical,
        f"gen-graphs + bench + curve each byte-identical across two invocations, {dt:.0f}s",
    )
