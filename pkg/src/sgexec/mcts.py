"""Monte-Carlo tree search over option sequences.

Each decision runs a fresh tree search on a frozen snapshot of the current
environment (receding horizon): UCB selection, single-child expansion
(uniform or guide-argmax), rollout to episode end below the depth cap, and
backpropagation of undiscounted episode returns. Diagnostics count
iterations and every simulated environment step across replans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import _kernels
from .rng import SplitMix64
from .world import EpisodeConfig, EpisodeRecord, run_episode

DEFAULT_C_UCB = 2.0 * math.sqrt(2.0)
DEFAULT_MAX_DEPTH = {"playground": 7, "mining": 10}

_HUGE = 1 << 60


def ucb_score(total_return: float, visit_count: int, total_iterations: int, c: float) -> float:
    """Upper confidence bound: mean return plus exploration bonus.

    Unvisited nodes score +inf so every sibling is tried before any repeat.
    """
    if c < 0:
        raise ValueError("exploration constant must be non-negative")
    if visit_count == 0:
        return math.inf
    if visit_count < 0 or total_iterations < 1:
        raise ValueError("need visit_count >= 0 and total_iterations >= 1")
    return total_return / visit_count + c * math.sqrt(math.log(total_iterations) / visit_count)


@dataclass
class MctsConfig:
    """Search budgets and variant switches.

    At least one of iteration_budget / simulated_step_budget is required
    (both caps apply when both are set; budgets are per decision).
    """

    c_ucb: float = DEFAULT_C_UCB
    max_depth: int | None = None  # default: 7 playground, 10 mining
    iteration_budget: int | None = None
    simulated_step_budget: int | None = None
    expansion: str = "random"  # random | grprop
    rollout: str = "random"    # random | grprop
    resample_motion: bool = False
    collect_tree: bool = False

    def __post_init__(self):
        if self.iteration_budget is None and self.simulated_step_budget is None:
            raise ValueError("set iteration_budget and/or simulated_step_budget")
        for b in (self.iteration_budget, self.simulated_step_budget):
            if b is not None and b < 1:
                raise ValueError("budgets must be positive")
        if self.c_ucb < 0:
            raise ValueError("c_ucb must be non-negative")
        for kind in (self.expansion, self.rollout):
            if kind not in ("random", "grprop"):
                raise ValueError(f"unknown selector {kind!r}")

    def depth_for(self, domain: str) -> int:
        return self.max_depth if self.max_depth is not None else DEFAULT_MAX_DEPTH[domain]


@dataclass
class SearchNode:
    """Diagnostic view of one tree node."""

    accumulated_return: float
    visit_count: int
    depth: int
    children: dict = field(default_factory=dict)
    snapshot: object = None


def tree_view(tree: dict) -> SearchNode:
    """Rebuild a SearchNode tree from the kernel's flat arrays."""
    nodes = [
        SearchNode(float(r), int(v), int(d))
        for r, v, d in zip(tree["returns"], tree["visits"], tree["depth"])
    ]
    for k in range(1, len(nodes)):
        nodes[int(tree["parent"][k])].children[int(tree["action"][k])] = nodes[k]
    return nodes[0]


class MctsPolicy:
    """Receding-horizon MCTS; re-plans after every executed option."""

    kernel_kind = None

    def __init__(self, config: MctsConfig, guide: str = "none"):
        if guide not in ("none", "grprop"):
            raise ValueError(f"unknown guide {guide!r}")
        if guide == "grprop":
            config = MctsConfig(**{**config.__dict__, "expansion": "grprop", "rollout": "grprop"})
        self.config = config
        self.tag = "mcts" if guide == "none" else "mcts+grprop"
        self._iters = 0
        self._steps = 0
        self._replans = 0
        self.last_tree = None

    def begin_episode(self, config, env, seed):
        self._stream = SplitMix64(seed)
        self._iters = 0
        self._steps = 0
        self._replans = 0

    def choose(self, env):
        from .policies import snapshot_pack

        if not any(env.state.eligibility):
            return None
        cfg = self.config
        if cfg.resample_motion and not env.config.freeze_stochastic:
            return self._choose_stochastic(env)
        pack, state = snapshot_pack(env)
        action, iters, steps, tree = _kernels.mcts_decide(
            pack,
            state,
            self._stream.next_u64(),
            cfg.c_ucb,
            cfg.depth_for(env.config.domain),
            cfg.iteration_budget or _HUGE,
            cfg.simulated_step_budget or _HUGE,
            cfg.expansion == "grprop",
            cfg.rollout == "grprop",
            cfg.collect_tree,
        )
        self._iters += iters
        self._steps += steps
        self._replans += 1
        if tree is not None:
            self.last_tree = tree_view(tree)
        return action if action >= 0 else None

    def _choose_stochastic(self, env):
        """Open-loop tree search with object motion re-sampled per
        simulation (slow path; kernel simulations are frozen)."""
        from .grprop import DEFAULT_SMOOTH, grprop_scores
        from .policies import GrpropPolicy, RandomPolicy

        cfg = self.config
        rng = self._stream
        iter_cap = cfg.iteration_budget or _HUGE
        step_cap = cfg.simulated_step_budget or _HUGE
        max_depth = cfg.depth_for(env.config.domain)
        smooth = DEFAULT_SMOOTH[env.config.domain]
        stats: dict[tuple, list] = {(): [0.0, 0]}
        iters = 0
        steps_used = 0
        rollout_policy = (
            GrpropPolicy(smooth) if cfg.rollout == "grprop" else RandomPolicy()
        )
        while iters < iter_cap and steps_used < step_cap:
            sim = _clone_env(env, rng.next_u64())
            if cfg.rollout == "random":
                rollout_policy.begin_episode(sim.config, sim, rng.next_u64())
            path = ()
            ep_return = 0.0
            # selection + single expansion
            while (
                sim.state.remaining_steps > 0
                and any(sim.state.eligibility)
                and len(path) < max_depth
            ):
                elig = [i for i in range(sim.graph.n_subtasks) if sim.state.eligibility[i]]
                unexpanded = [a for a in elig if path + (a,) not in stats]
                if unexpanded:
                    if cfg.expansion == "grprop":
                        scores = grprop_scores(sim.graph, sim.state, smooth)
                        a = max(unexpanded, key=lambda b: (scores[b], -b))
                    else:
                        a = unexpanded[rng.bounded(len(unexpanded))]
                    stats[path + (a,)] = [0.0, 0]
                    out = sim.execute_option(a)
                    ep_return += out.reward
                    steps_used += out.steps
                    path = path + (a,)
                    break
                a = max(
                    elig,
                    key=lambda b: (
                        ucb_score(
                            stats[path + (b,)][0], stats[path + (b,)][1],
                            max(1, iters), cfg.c_ucb,
                        ),
                        -b,
                    ),
                )
                out = sim.execute_option(a)
                ep_return += out.reward
                steps_used += out.steps
                path = path + (a,)
            # rollout to episode end
            while sim.state.remaining_steps > 0 and any(sim.state.eligibility):
                a = rollout_policy.choose(sim)
                if a is None:
                    break
                out = sim.execute_option(a)
                ep_return += out.reward
                steps_used += out.steps
            for k in range(len(path) + 1):
                node = stats.setdefault(path[:k], [0.0, 0])
                node[0] += ep_return
                node[1] += 1
            iters += 1
        self._iters += iters
        self._steps += steps_used
        self._replans += 1
        elig = [i for i in range(env.graph.n_subtasks) if env.state.eligibility[i]]
        visited = [(stats[(a,)][1], -a) for a in elig if (a,) in stats]
        if not visited:
            return None
        best = max(visited)
        return -best[1]

    def diagnostics(self):
        return {
            "iterations": self._iters,
            "simulated_steps": self._steps,
            "replans": self._replans,
        }


def _clone_env(env, motion_seed: int):
    from .world import GridWorld

    clone = GridWorld.__new__(GridWorld)
    clone.config = env.config
    clone.graph = env.graph
    clone.budget = env.budget
    clone.map = env.map
    clone.passable = env.passable
    clone.inst_pos = list(env.inst_pos)
    clone.inst_type = list(env.inst_type)
    clone.inst_alive = list(env.inst_alive)
    clone.agent = env.agent
    clone.state = env.state
    clone.motion_rng = SplitMix64(motion_seed)
    clone.options = env.options
    return clone


def mcts_plan(config: EpisodeConfig, mcfg: MctsConfig, guide: str = "none") -> tuple[EpisodeRecord, dict]:
    """Execute one episode under receding-horizon MCTS.

    Returns the episode record (per-step decisions, rewards, costs) and the
    aggregated search diagnostics (iterations, simulated steps, replans).
    """
    policy = MctsPolicy(mcfg, guide=guide)
    record = run_episode(config, policy)
    return record, record.diagnostics
