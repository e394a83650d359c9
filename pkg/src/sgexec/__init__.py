"""Subtask-graph execution: AND-OR-NOT task graphs with per-subtask rewards,
a gradient-based reward-propagation policy over a smoothed relaxation of the
graph, gridworld benchmark environments, and search baselines (exhaustive
optimal, MCTS) with a reproducible benchmark harness.

The hot kernels (frozen-environment simulation, branch-and-bound search,
MCTS) run in a compiled extension when available; `sgexec.kernel_backend()`
reports which implementation is active.
"""

from ._kernels import BACKEND as _KERNEL_BACKEND
from .generate import GenParams, enumerate_mining_subgraphs, generate_playground_graph, mining_template, preset
from .graphs import (
    AndNode,
    GraphStructureError,
    SubtaskGraph,
    SubtaskSpec,
    TaskState,
    compute_eligibility,
    episode_return,
    execute_subtask,
)
from .grprop import (
    MINING_SMOOTH,
    PLAYGROUND_SMOOTH,
    SmoothedEval,
    SmoothParams,
    grprop_policy,
    grprop_scores,
    smoothed_and,
    smoothed_eligibility,
    smoothed_or,
)
from .mcts import MctsConfig, SearchNode, mcts_plan, ucb_score
from .policies import PolicyId, greedy_policy, optimal_search, random_policy
from .world import EpisodeConfig, EpisodeRecord, MapSpec, OptionSpec, run_episode, sample_map, step_objects

__version__ = "0.1.0"


def kernel_backend() -> str:
    """Active kernel implementation: "compiled" or "python"."""
    return _KERNEL_BACKEND
