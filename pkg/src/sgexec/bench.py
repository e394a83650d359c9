"""Corpus management, experiment execution, and metrics.

Returns are normalized per graph against the Random policy's mean (0) and
the Optimal policy's mean (1); Mining corpora report raw mean returns
instead (exhaustive search is refused at Mining sizes). All runs are
deterministic given the corpus seed: per-episode seeds are derived from
(corpus seed, graph index, episode index), so every row is reproducible in
isolation.
"""

from __future__ import annotations

import json
import sys
import time
from dataclasses import dataclass
from multiprocessing import get_context
from pathlib import Path

from .graphs import GraphStructureError, SubtaskGraph
from .mcts import MctsConfig, MctsPolicy
from .policies import PolicyId, make_policy
from .rng import derive_seed
from .world import EpisodeConfig, run_episode


class DataError(ValueError):
    """Inconsistent metric inputs."""


def normalized_reward(R: float, R_min: float, R_max: float) -> float | None:
    """(R - R_min) / (R_max - R_min); None (flagged undefined) when the
    Random and Optimal baselines coincide."""
    if R_max < R_min:
        raise DataError(f"R_max ({R_max}) < R_min ({R_min})")
    if R_max == R_min:
        return None
    return (R - R_min) / (R_max - R_min)


@dataclass
class BenchRow:
    graph_id: str
    policy: str
    episodes: int
    mean_return: float
    r_min: float | None
    r_max: float | None
    normalized: float | None
    simulated_steps: int | None
    wall_time: float | None = None  # stderr only; never serialized


@dataclass
class CurveRow:
    graph_id: str
    guide: str
    seed: int
    step_budget: int
    episodes: int
    mean_return: float
    normalized: float | None
    iterations: int
    simulated_steps: int


# -- corpus I/O ----------------------------------------------------------------


def save_corpus(
    graphs: list[SubtaskGraph],
    out_dir: str | Path,
    domain: str,
    preset: str,
    seed: int,
    split: dict[str, list[str]] | None = None,
) -> list[str]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    ids = []
    for k, g in enumerate(graphs):
        gid = f"{preset}-{k:04d}"
        (out / f"{gid}.json").write_text(g.dumps())
        ids.append(gid)
    manifest = {
        "domain": domain,
        "preset": preset,
        "seed": seed,
        "count": len(graphs),
        "graphs": ids,
    }
    if split:
        manifest["split"] = split
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return ids


def load_corpus(path: str | Path, domain: str | None = None):
    """(domain, [(graph_id, graph), ...]) sorted by id. Unreadable files are
    reported to stderr and skipped; the run continues."""
    from .domains import infer_domain

    root = Path(path)
    manifest = {}
    mf = root / "manifest.json"
    if mf.exists():
        try:
            manifest = json.loads(mf.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            print(f"warning: unreadable manifest {mf}: {exc}", file=sys.stderr)
    entries = []
    for f in sorted(root.glob("*.json")):
        if f.name == "manifest.json":
            continue
        try:
            graph = SubtaskGraph.loads(f.read_text())
        except (OSError, json.JSONDecodeError, GraphStructureError) as exc:
            print(f"warning: skipping unreadable graph {f}: {exc}", file=sys.stderr)
            continue
        entries.append((f.stem, graph))
    if domain is None:
        domain = manifest.get("domain")
    if domain is None and entries:
        domain = infer_domain(s.label for s in entries[0][1].subtasks)
    return domain or "playground", entries


# -- execution -------------------------------------------------------------------


def episode_seed(corpus_seed: int, graph_index: int, episode_index: int) -> int:
    return derive_seed(corpus_seed, graph_index, episode_index)


def _eval_policy_on_graph(args):
    (domain, graph, gid, gidx, pid, episodes, corpus_seed, freeze, map_size,
     optimal_guard) = args
    policy = make_policy(pid)
    if pid.tag == "optimal":
        policy.max_subtasks = optimal_guard
    returns = []
    sim_steps = 0
    has_steps = False
    t0 = time.perf_counter()
    for e in range(episodes):
        config = EpisodeConfig(
            domain=domain, graph=graph, seed=episode_seed(corpus_seed, gidx, e),
            freeze_stochastic=freeze, map_height=map_size, map_width=map_size,
        )
        record = run_episode(config, policy)
        returns.append(record.total_return)
        if "simulated_steps" in record.diagnostics:
            has_steps = True
            sim_steps += record.diagnostics["simulated_steps"]
    mean = sum(returns) / len(returns) if returns else 0.0
    return gid, pid.tag, mean, len(returns), (sim_steps if has_steps else None), time.perf_counter() - t0


def run_bench(
    corpus,
    policies: list[PolicyId],
    episodes_per_graph: int = 16,
    seed: int = 0,
    domain: str = "playground",
    freeze: bool = True,
    map_size: int = 10,
    optimal_guard: int = 13,
    workers: int = 1,
) -> list[BenchRow]:
    """Evaluate policies over a corpus; one row per (graph, policy).

    Playground rows carry normalized reward when both the random and
    optimal baselines were run; Mining rows report raw means only.
    """
    tags = [p.tag for p in policies]
    if domain == "mining" and "optimal" in tags:
        raise DataError("the optimal baseline is not evaluated on Mining corpora")
    tasks = [
        (domain, graph, gid, gidx, pid, episodes_per_graph, seed, freeze,
         map_size, optimal_guard)
        for gidx, (gid, graph) in enumerate(corpus)
        for pid in policies
    ]
    if workers > 1:
        with get_context("fork").Pool(workers) as pool:
            results = pool.map(_eval_policy_on_graph, tasks)
    else:
        results = [_eval_policy_on_graph(t) for t in tasks]
    by_graph: dict[str, dict[str, tuple]] = {}
    for gid, tag, mean, eps, steps, wall in results:
        by_graph.setdefault(gid, {})[tag] = (mean, eps, steps, wall)
    rows = []
    normalize = domain != "mining"
    for gid in sorted(by_graph):
        cell = by_graph[gid]
        r_min = cell.get("random", (None,))[0] if normalize else None
        r_max = cell.get("optimal", (None,))[0] if normalize else None
        for tag in sorted(cell):
            mean, eps, steps, wall = cell[tag]
            norm = None
            if normalize and r_min is not None and r_max is not None:
                norm = normalized_reward(mean, r_min, r_max)
            rows.append(BenchRow(gid, tag, eps, mean, r_min, r_max, norm, steps, wall))
    return rows


def run_curve(
    corpus,
    step_budgets: list[int],
    guide: str = "none",
    episodes_per_graph: int = 2,
    seed: int = 0,
    domain: str = "playground",
    freeze: bool = True,
    map_size: int = 10,
    optimal_guard: int = 20,
    max_depth: int | None = None,
) -> list[CurveRow]:
    """MCTS performance per simulated-step budget (budgets are per
    decision; rows also aggregate total simulated steps per episode)."""
    normalize = domain != "mining"
    rows = []
    for gidx, (gid, graph) in enumerate(corpus):
        baselines = {}
        if normalize:
            for tag in ("random", "optimal"):
                pid = PolicyId(tag)
                _gid, _tag, mean, _eps, _steps, _wall = _eval_policy_on_graph(
                    (domain, graph, gid, gidx, pid, episodes_per_graph, seed,
                     True, map_size, optimal_guard)
                )
                baselines[tag] = mean
        for budget in step_budgets:
            mcfg = MctsConfig(simulated_step_budget=int(budget), max_depth=max_depth)
            policy = MctsPolicy(mcfg, guide=guide)
            returns = []
            iters = 0
            steps = 0
            for e in range(episodes_per_graph):
                config = EpisodeConfig(
                    domain=domain, graph=graph, seed=episode_seed(seed, gidx, e),
                    freeze_stochastic=freeze, map_height=map_size, map_width=map_size,
                )
                record = run_episode(config, policy)
                returns.append(record.total_return)
                iters += record.diagnostics.get("iterations", 0)
                steps += record.diagnostics.get("simulated_steps", 0)
            mean = sum(returns) / len(returns)
            norm = (
                normalized_reward(mean, baselines["random"], baselines["optimal"])
                if normalize
                else None
            )
            rows.append(
                CurveRow(
                    gid, guide, seed, int(budget), episodes_per_graph, mean, norm,
                    iters, steps,
                )
            )
    return rows


# -- serialization ----------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


BENCH_HEADER = "graph_id,policy,episodes,mean_return,r_min,r_max,normalized,simulated_steps"
CURVE_HEADER = (
    "graph_id,guide,seed,step_budget,episodes,mean_return,normalized,iterations,"
    "simulated_steps"
)


def bench_rows_to_csv(rows: list[BenchRow]) -> str:
    lines = [BENCH_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.graph_id, r.policy, r.episodes, r.mean_return, r.r_min,
                    r.r_max, r.normalized, r.simulated_steps,
                )
            )
        )
    return "\n".join(lines) + "\n"


def curve_rows_to_csv(rows: list[CurveRow]) -> str:
    lines = [CURVE_HEADER]
    for r in rows:
        lines.append(
            ",".join(
                _fmt(v)
                for v in (
                    r.graph_id, r.guide, r.seed, r.step_budget, r.episodes,
                    r.mean_return, r.normalized, r.iterations, r.simulated_steps,
                )
            )
        )
    return "\n".join(lines) + "\n"


def write_run_manifest(path: Path, **fields) -> None:
    path.write_text(json.dumps(fields, indent=2, sort_keys=True) + "\n")
