"""Flat array representation of a frozen episode, shared by both kernels.

The compiled extension and the pure-Python fallback consume the same packed
arrays: graph structure in CSR form, option bindings, object instances, and
terrain. Mutable episode state (completion, agent cell, budget, instance
liveness) lives in a small FrozenState.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import domains
from ..grprop import DEFAULT_SMOOTH, SmoothParams
from ..world import EpisodeConfig, MapSpec, option_of

INTER_PICKUP = 0
INTER_TRANSFORM = 1
INTER_USE = 2


@dataclass
class SimPack:
    """Static per-episode data (graph + initial map), kernel-ready."""

    n: int
    height: int
    width: int
    reward: np.ndarray      # f8[n]
    or_off: np.ndarray      # i4[n+1] AND-term slice per subtask
    term_size: np.ndarray   # i4[terms]
    and_off: np.ndarray     # i4[terms+1] edge slice per AND term
    and_child: np.ndarray   # i4[edges]
    and_neg: np.ndarray     # i1[edges] 1 if negated
    opt_inter: np.ndarray   # i1[n]
    opt_type: np.ndarray    # i2[n]
    inst_pos: np.ndarray    # i4[K] initial cell (r*W + c)
    inst_type: np.ndarray   # i2[K]
    passable: np.ndarray    # u1[H*W]
    all_passable: bool
    ice_type: int
    agent0: int
    alpha_or: float
    beta_or: float
    alpha_and: float
    beta_and: float


@dataclass
class FrozenState:
    """Mutable episode state on top of a SimPack."""

    completion: np.ndarray  # u1[n]
    agent: int
    rem: int
    inst_alive: np.ndarray  # u1[K]
    inst_ctype: np.ndarray  # i2[K] current type (transform changes it)

    def clone(self) -> "FrozenState":
        return FrozenState(
            self.completion.copy(), self.agent, self.rem,
            self.inst_alive.copy(), self.inst_ctype.copy(),
        )


def build_simpack(
    config: EpisodeConfig, map_spec: MapSpec, smooth: SmoothParams | None = None
) -> SimPack:
    graph = config.graph
    n = graph.n_subtasks
    smooth = smooth or DEFAULT_SMOOTH[config.domain]
    types = (
        domains.PLAYGROUND_TYPES if config.domain == "playground" else domains.MINING_TYPES
    )
    type_id = {t: k for k, t in enumerate(types)}

    or_off = [0]
    term_size: list[int] = []
    and_off = [0]
    and_child: list[int] = []
    and_neg: list[int] = []
    for i in range(n):
        for aid in graph.or_children[i]:
            node = graph.and_node(aid)
            term_size.append(len(node.children))
            for child, neg in node.children:
                and_child.append(child)
                and_neg.append(1 if neg else 0)
            and_off.append(len(and_child))
        or_off.append(len(term_size))

    opt_inter = np.zeros(n, dtype=np.int8)
    opt_type = np.zeros(n, dtype=np.int16)
    for i in range(n):
        opt = option_of(config.domain, graph, i)
        if opt.interaction == "pickup":
            opt_inter[i] = INTER_PICKUP
        elif opt.interaction == "transform":
            opt_inter[i] = INTER_TRANSFORM
        else:
            opt_inter[i] = INTER_USE
        opt_type[i] = type_id[opt.target_type]

    H, W = map_spec.height, map_spec.width
    passable = np.ones(H * W, dtype=np.uint8)
    for ob in map_spec.obstacles:
        passable[ob.pos[0] * W + ob.pos[1]] = 0
    inst_pos = np.array(
        [ob.pos[0] * W + ob.pos[1] for ob in map_spec.instances], dtype=np.int32
    )
    inst_type = np.array(
        [type_id[ob.type_name] for ob in map_spec.instances], dtype=np.int16
    )

    return SimPack(
        n=n,
        height=H,
        width=W,
        reward=np.asarray(graph.rewards, dtype=np.float64),
        or_off=np.asarray(or_off, dtype=np.int32),
        term_size=np.asarray(term_size, dtype=np.int32),
        and_off=np.asarray(and_off, dtype=np.int32),
        and_child=np.asarray(and_child, dtype=np.int32),
        and_neg=np.asarray(and_neg, dtype=np.int8),
        opt_inter=opt_inter,
        opt_type=opt_type,
        inst_pos=inst_pos,
        inst_type=inst_type,
        passable=passable,
        all_passable=bool(passable.all()),
        ice_type=type_id.get("Ice", -1),
        agent0=map_spec.agent[0] * W + map_spec.agent[1],
        alpha_or=smooth.alpha_or,
        beta_or=smooth.beta_or,
        alpha_and=smooth.alpha_and,
        beta_and=smooth.beta_and,
    )


def initial_state(pack: SimPack, budget: int) -> FrozenState:
    return FrozenState(
        completion=np.zeros(pack.n, dtype=np.uint8),
        agent=pack.agent0,
        rem=int(budget),
        inst_alive=np.ones(len(pack.inst_pos), dtype=np.uint8),
        inst_ctype=pack.inst_type.copy(),
    )
