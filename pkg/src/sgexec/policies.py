"""Baseline and oracle policies: random, greedy, and exhaustive optimal.

Policies follow a small protocol used by the episode loop: an optional
`begin_episode(config, env, seed)` hook, `choose(env) -> subtask id or
None`, and an optional `kernel_kind` marker that lets frozen episodes run
entirely inside the selected kernel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graphs import SubtaskGraph, TaskState
from .grprop import DEFAULT_SMOOTH, SmoothParams, grprop_scores
from .rng import SplitMix64
from .world import EpisodeConfig, GridWorld, episode_setup

POLICY_TAGS = ("random", "greedy", "grprop", "optimal", "mcts", "mcts+grprop")


class IntractableError(RuntimeError):
    """Raised when exhaustive search is refused as too large."""


@dataclass(frozen=True)
class PolicyId:
    """Policy selector: a tag plus a per-policy configuration blob."""

    tag: str
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.tag not in POLICY_TAGS:
            raise ValueError(f"unknown policy tag {self.tag!r}; known: {POLICY_TAGS}")


def random_policy(graph: SubtaskGraph, state: TaskState, rng) -> int | None:
    """Uniform choice over eligible subtasks; None when none are eligible."""
    ids = [i for i in range(graph.n_subtasks) if state.eligibility[i]]
    if not ids:
        return None
    if isinstance(rng, SplitMix64):
        return ids[rng.bounded(len(ids))]
    return ids[int(rng.integers(len(ids)))]


def greedy_policy(graph: SubtaskGraph, state: TaskState) -> int | None:
    """Eligible subtask with the largest reward; ties go to the lowest id."""
    best = None
    for i in range(graph.n_subtasks):
        if state.eligibility[i] and (best is None or graph.subtasks[i].reward > graph.subtasks[best].reward):
            best = i
    return best


def snapshot_pack(env: GridWorld, smooth: SmoothParams | None = None):
    """Freeze the current environment into kernel arrays + mutable state."""
    pack = _kernels.build_simpack(env.config, env.snapshot_map(), smooth)
    state = _kernels.initial_state(pack, env.state.remaining_steps)
    state.completion[:] = np.asarray(env.state.completion, dtype=np.uint8)
    return pack, state


class RandomPolicy:
    tag = "random"
    kernel_kind = _kernels.POLICY_RANDOM

    def begin_episode(self, config, env, seed):
        self._rng = SplitMix64(seed)

    def choose(self, env):
        return random_policy(env.graph, env.state, self._rng)


class GreedyPolicy:
    tag = "greedy"
    kernel_kind = _kernels.POLICY_GREEDY

    def choose(self, env):
        return greedy_policy(env.graph, env.state)


class GrpropPolicy:
    """Gradient-of-smoothed-utility policy (argmax over eligible scores)."""

    tag = "grprop"
    kernel_kind = _kernels.POLICY_GRPROP

    def __init__(self, smooth: SmoothParams | None = None):
        self.smooth = smooth

    def begin_episode(self, config, env, seed):
        if self.smooth is None:
            self.smooth = DEFAULT_SMOOTH[config.domain]

    def choose(self, env):
        smooth = self.smooth or DEFAULT_SMOOTH[env.config.domain]
        elig = np.asarray(env.state.eligibility, dtype=bool)
        if not elig.any():
            return None
        scores = grprop_scores(env.graph, env.state, smooth)
        return int(np.argmax(np.where(elig, scores, -np.inf)))


class OptimalPolicy:
    """Plans once per episode with exhaustive search and replays the plan.

    Only defined on frozen environments (the search model must match the
    world exactly)."""

    tag = "optimal"
    kernel_kind = None

    def __init__(self, max_subtasks: int = 13):
        self.max_subtasks = max_subtasks
        self.best_return = None

    def begin_episode(self, config, env, seed):
        if not config.freeze_stochastic:
            raise ValueError("the optimal policy requires freeze_stochastic episodes")
        if config.graph.n_subtasks > self.max_subtasks:
            raise IntractableError(
                f"{config.graph.n_subtasks} subtasks exceed the exhaustive-search "
                f"guard of {self.max_subtasks}"
            )
        pack, state = snapshot_pack(env)
        self.best_return, plan, _nodes = _kernels.optimal_search(pack, state)
        self._plan = list(plan)

    def choose(self, env):
        if not self._plan:
            return None
        return self._plan.pop(0)


def optimal_search(
    config: EpisodeConfig, horizon_budget: int | None = None, max_subtasks: int = 13
) -> tuple[float, list[int]]:
    """Exhaustive branch-and-bound search over eligible option sequences.

    Returns (best achievable return, one witness sequence) for the frozen
    episode instance defined by `config` (budget sampled from the graph's
    range unless `horizon_budget` is given). Refuses graphs above the
    `max_subtasks` guard instead of running forever.
    """
    if config.graph.n_subtasks > max_subtasks:
        raise IntractableError(
            f"{config.graph.n_subtasks} subtasks exceed the exhaustive-search "
            f"guard of {max_subtasks}"
        )
    frozen = EpisodeConfig(
        domain=config.domain, graph=config.graph, seed=config.seed,
        freeze_stochastic=True, map_height=config.map_height, map_width=config.map_width,
    )
    budget, map_spec, _policy_seed, _motion_seed = episode_setup(frozen)
    if horizon_budget is not None:
        budget = horizon_budget
    pack = _kernels.build_simpack(frozen, map_spec)
    state = _kernels.initial_state(pack, budget)
    best, seq, _nodes = _kernels.optimal_search(pack, state)
    return best, seq


def make_policy(pid: PolicyId):
    """Instantiate a policy object from its id."""
    from .mcts import MctsConfig, MctsPolicy

    cfg = dict(pid.config)
    if pid.tag == "random":
        return RandomPolicy()
    if pid.tag == "greedy":
        return GreedyPolicy()
    if pid.tag == "grprop":
        return GrpropPolicy(cfg.get("smooth"))
    if pid.tag == "optimal":
        return OptimalPolicy(max_subtasks=cfg.get("max_subtasks", 13))
    guide = "grprop" if pid.tag == "mcts+grprop" else "none"
    mcfg = cfg.pop("mcts", None) or MctsConfig(
        iteration_budget=cfg.pop("iteration_budget", None),
        simulated_step_budget=cfg.pop("simulated_step_budget", None),
        **cfg,
    )
    return MctsPolicy(mcfg, guide=guide)
