"""Kernel backend selection: compiled extension when available, else the
pure-Python twin. Both expose the same functions over the same packed arrays
and consume identical random streams."""

from __future__ import annotations

import os

from . import reference
from .pack import FrozenState, SimPack, build_simpack, initial_state

if os.environ.get("SGEXEC_FORCE_PYTHON"):
    impl = reference
else:
    try:
        from . import _speedups as impl  # type: ignore[no-redef]
    except ImportError:
        impl = reference

BACKEND = impl.BACKEND_NAME

POLICY_RANDOM = reference.POLICY_RANDOM
POLICY_GREEDY = reference.POLICY_GREEDY
POLICY_GRPROP = reference.POLICY_GRPROP

eligibility = impl.eligibility
grprop_scores = impl.grprop_scores
nearest_instance = impl.nearest_instance
step_option = impl.step_option
episode = impl.episode
optimal_search = impl.optimal_search
mcts_decide = impl.mcts_decide


def run_episode_kernel(config, map_spec, budget, policy, policy_seed):
    """Frozen-environment episode through the selected kernel; produces the
    same record as the stepwise Python environment."""
    from ..world import EpisodeRecord, OptionOutcome

    pack = build_simpack(config, map_spec, getattr(policy, "smooth", None))
    outcomes, completion, total, steps = episode(
        pack, budget, policy.kernel_kind, policy_seed
    )
    return EpisodeRecord(
        policy=getattr(policy, "tag", policy.__class__.__name__),
        seed=config.seed,
        budget=budget,
        options=tuple(OptionOutcome(a, s, r, bool(c)) for a, s, r, c in outcomes),
        final_completion=tuple(int(v) for v in completion),
        total_return=float(total),
        steps_used=int(steps),
        diagnostics={},
    )
