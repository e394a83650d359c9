"""Compare the compiled kernels against the pure-Python fallback.

Usage: python benchmarks/kernel_bench.py [--seed N]

Both backends run identical algorithms on identical random streams, so the
outputs are checked for agreement while timing; the table reports per-call
latency and the speedup factor.
"""

import argparse
import time

import numpy as np

from sgexec import _kernels
from sgexec._kernels import pack as packmod
from sgexec._kernels import reference
from sgexec.generate import generate_playground_graph, preset
from sgexec.world import EpisodeConfig, episode_setup


def timeit(fn, repeat):
    t0 = time.perf_counter()
    out = None
    for _ in range(repeat):
        out = fn()
    return (time.perf_counter() - t0) / repeat, out


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    if _kernels.BACKEND != "compiled":
        print("compiled extension not available; nothing to compare "
              "(build with `pip install -e . --no-build-isolation`)")
        return 1
    compiled = _kernels.impl

    graph = generate_playground_graph(preset("D2"), np.random.default_rng(args.seed))
    cfg = EpisodeConfig("playground", graph, seed=args.seed, freeze_stochastic=True)
    budget, map_spec, pseed, _ = episode_setup(cfg)
    pack = packmod.build_simpack(cfg, map_spec)
    x0 = np.zeros(graph.n_subtasks, dtype=np.uint8)

    cases = [
        (
            "eligibility",
            lambda impl: impl.eligibility(pack, x0),
            2000,
        ),
        (
            "grprop_scores",
            lambda impl: impl.grprop_scores(pack, x0),
            2000,
        ),
        (
            "episode (grprop)",
            lambda impl: impl.episode(pack, budget, 2, pseed),
            200,
        ),
        (
            "optimal_search",
            lambda impl: impl.optimal_search(pack, packmod.initial_state(pack, budget)),
            3,
        ),
        (
            "mcts_decide (500 iters)",
            lambda impl: impl.mcts_decide(
                pack, packmod.initial_state(pack, budget), pseed,
                2.8284271247461903, 7, 500, 1 << 60, False, False, False,
            ),
            3,
        ),
    ]

    print(f"graph: D2, {graph.n_subtasks} subtasks, budget {budget}")
    print(f"{'kernel':<26}{'python':>12}{'compiled':>12}{'speedup':>9}")
    for name, make, repeat in cases:
        t_py, out_py = timeit(lambda: make(reference), repeat)
        t_c, out_c = timeit(lambda: make(compiled), max(repeat, repeat * 20))
        if name.startswith("episode"):
            assert out_py[2] == out_c[2], "backend returns diverged"
        if name == "optimal_search":
            assert out_py[0] == out_c[0] and list(out_py[1]) == list(out_c[1])
        if name.startswith("mcts"):
            assert out_py[0] == out_c[0] and out_py[2] == out_c[2]
        print(f"{name:<26}{t_py * 1e3:>10.3f}ms{t_c * 1e3:>10.3f}ms{t_py / t_c:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
