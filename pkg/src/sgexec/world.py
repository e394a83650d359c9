"""Gridworld environments implementing the task MDP.

Executing a subtask is a temporally extended option: walk to the nearest
instance of the option's target type along a shortest passable path, then
perform the interaction primitive; the option's duration (path length + 1)
is charged against the episode's step budget. Playground maps are open with
a few stochastically moving object types; Mining maps contain impassable
terrain and fixed craft stations.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import domains
from .graphs import SubtaskGraph, TaskState, episode_return
from .rng import SplitMix64, derive_seed


class ConfigError(ValueError):
    """Invalid environment configuration (e.g., map too small)."""


@dataclass(frozen=True)
class OptionSpec:
    """Interaction primitive plus target object type."""

    interaction: str
    target_type: str


@dataclass(frozen=True)
class ObjectInstance:
    pos: tuple[int, int]
    type_name: str


@dataclass(frozen=True)
class MapSpec:
    """Immutable map snapshot: terrain, object instances, agent position."""

    height: int
    width: int
    domain: str
    obstacles: tuple[ObjectInstance, ...]
    instances: tuple[ObjectInstance, ...]
    agent: tuple[int, int]

    def passable_grid(self) -> np.ndarray:
        grid = np.ones((self.height, self.width), dtype=bool)
        for ob in self.obstacles:
            grid[ob.pos] = False
        return grid

    def to_onehot(self) -> np.ndarray:
        """H x W x C one-hot tensor view (object-type channels + agent)."""
        types = domains.PLAYGROUND_TYPES if self.domain == "playground" else domains.MINING_TYPES
        idx = {t: c for c, t in enumerate(types)}
        out = np.zeros((self.height, self.width, len(types) + 1), dtype=np.uint8)
        for ob in self.obstacles + self.instances:
            out[ob.pos[0], ob.pos[1], idx[ob.type_name]] = 1
        out[self.agent[0], self.agent[1], len(types)] = 1
        return out

    def ascii_render(self) -> str:
        types = domains.PLAYGROUND_TYPES if self.domain == "playground" else domains.MINING_TYPES
        chars = {t: t[0] if i % 2 == 0 else t[0].lower() for i, t in enumerate(types)}
        # Ensure distinct glyphs per type.
        seen: dict[str, str] = {}
        pool = "0123456789*#%&"
        p = 0
        for t in types:
            ch = chars[t]
            if ch in seen.values():
                ch = pool[p]
                p += 1
            seen[t] = ch
        legend = ", ".join(f"{seen[t]}={t}" for t in types) + ", @=agent, .=empty"
        grid = [["." for _ in range(self.width)] for _ in range(self.height)]
        for ob in self.obstacles + self.instances:
            grid[ob.pos[0]][ob.pos[1]] = seen[ob.type_name]
        grid[self.agent[0]][self.agent[1]] = "@"
        return legend + "\n" + "\n".join("".join(row) for row in grid)


@dataclass(frozen=True)
class EpisodeConfig:
    """One episode instance: domain, graph, seed, stochasticity switch."""

    domain: str
    graph: SubtaskGraph
    seed: int
    freeze_stochastic: bool = False
    map_height: int = 10
    map_width: int = 10

    def __post_init__(self):
        if self.domain not in ("playground", "mining"):
            raise ConfigError(f"unknown domain {self.domain!r}")


@dataclass(frozen=True)
class OptionOutcome:
    subtask: int
    steps: int
    reward: float
    completed: bool


@dataclass(frozen=True)
class EpisodeRecord:
    policy: str
    seed: int
    budget: int
    options: tuple[OptionOutcome, ...]
    final_completion: tuple[int, ...]
    total_return: float
    steps_used: int
    diagnostics: dict = field(default_factory=dict)


def option_of(config_domain: str, graph: SubtaskGraph, subtask_id: int) -> OptionSpec:
    inter, obj = domains.parse_option(config_domain, graph.subtasks[subtask_id].label)
    return OptionSpec(inter, obj)


def sample_map(config: EpisodeConfig, rng: np.random.Generator) -> MapSpec:
    """Random initial map: one object instance per subtask (Playground) or
    per pickup subtask plus the four fixed stations (Mining)."""
    H, W = config.map_height, config.map_width
    graph = config.graph
    if config.domain == "playground":
        needed = [
            option_of("playground", graph, i).target_type for i in range(graph.n_subtasks)
        ]
        obstacles: list[ObjectInstance] = []
        passable = np.ones((H, W), dtype=bool)
    else:
        stations = list(domains.MINING_STATIONS)
        picks = [
            option_of("mining", graph, i).target_type
            for i in range(graph.n_subtasks)
            if option_of("mining", graph, i).interaction == "pickup"
        ]
        needed = stations + picks
        for _ in range(50):
            n_mountain = int(rng.integers(4, 8))
            n_water = int(rng.integers(2, 5))
            cells = rng.choice(H * W, size=n_mountain + n_water, replace=False)
            passable = np.ones((H, W), dtype=bool)
            for c in cells:
                passable[c // W, c % W] = False
            if _connected(passable):
                break
        else:
            raise ConfigError("could not sample a connected map")
        obstacles = [
            ObjectInstance((int(c // W), int(c % W)), "Mountain" if k < n_mountain else "Water")
            for k, c in enumerate(cells)
        ]
    free = [
        (r, c) for r in range(H) for c in range(W) if passable[r, c]
    ]
    if len(free) < len(needed) + 1:
        raise ConfigError(
            f"map {H}x{W} too small for {len(needed)} objects plus the agent"
        )
    order = rng.choice(len(free), size=len(needed) + 1, replace=False)
    instances = tuple(
        ObjectInstance(free[int(order[k])], t) for k, t in enumerate(needed)
    )
    agent = free[int(order[len(needed)])]
    return MapSpec(H, W, config.domain, tuple(obstacles), instances, agent)


def _connected(passable: np.ndarray) -> bool:
    H, W = passable.shape
    start = None
    for r in range(H):
        for c in range(W):
            if passable[r, c]:
                start = (r, c)
                break
        if start:
            break
    if start is None:
        return False
    seen = {start}
    q = deque([start])
    while q:
        r, c = q.popleft()
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < H and 0 <= nc < W and passable[nr, nc] and (nr, nc) not in seen:
                seen.add((nr, nc))
                q.append((nr, nc))
    return len(seen) == int(passable.sum())


def step_objects(map_spec: MapSpec, rng: SplitMix64, freeze: bool = False) -> MapSpec:
    """One tick of object dynamics. Playground Cows/Ducks move one cell in a
    random cardinal direction with probability 0.1/0.2; moves into
    impassable or object-occupied cells are cancelled. Mining objects are
    static; `freeze` disables all motion."""
    if freeze or map_spec.domain != "playground":
        return map_spec
    movers = domains.PLAYGROUND_MOVERS
    occupied = {ob.pos for ob in map_spec.instances} | {ob.pos for ob in map_spec.obstacles}
    out = list(map_spec.instances)
    for k, ob in enumerate(map_spec.instances):
        p = movers.get(ob.type_name)
        if p is None:
            continue
        if rng.uniform() >= p:
            continue
        dr, dc = ((-1, 0), (1, 0), (0, -1), (0, 1))[rng.bounded(4)]
        nr, nc = ob.pos[0] + dr, ob.pos[1] + dc
        if not (0 <= nr < map_spec.height and 0 <= nc < map_spec.width):
            continue
        if (nr, nc) in occupied:
            continue
        occupied.discard(ob.pos)
        occupied.add((nr, nc))
        out[k] = ObjectInstance((nr, nc), ob.type_name)
    return MapSpec(
        map_spec.height, map_spec.width, map_spec.domain,
        map_spec.obstacles, tuple(out), map_spec.agent,
    )


class GridWorld:
    """Mutable episode environment (one per episode; not shared)."""

    def __init__(self, config: EpisodeConfig, map_spec: MapSpec, budget: int,
                 motion_rng: SplitMix64 | None = None):
        self.config = config
        self.graph = config.graph
        self.budget = budget
        self.map = map_spec
        self.passable = map_spec.passable_grid()
        self.inst_pos = [ob.pos for ob in map_spec.instances]
        self.inst_type = [ob.type_name for ob in map_spec.instances]
        self.inst_alive = [True] * len(map_spec.instances)
        self.agent = map_spec.agent
        self.state = TaskState.initial(config.graph, budget)
        self.motion_rng = motion_rng or SplitMix64(0)
        self.options = [
            option_of(config.domain, config.graph, i)
            for i in range(config.graph.n_subtasks)
        ]

    # -- geometry ------------------------------------------------------------

    def _distances_from(self, pos: tuple[int, int]) -> np.ndarray:
        H, W = self.passable.shape
        dist = np.full((H, W), -1, dtype=np.int32)
        dist[pos] = 0
        q = deque([pos])
        while q:
            r, c = q.popleft()
            d = dist[r, c] + 1
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < H and 0 <= nc < W and self.passable[nr, nc] and dist[nr, nc] < 0:
                    dist[nr, nc] = d
                    q.append((nr, nc))
        return dist

    def nearest_instance(self, target_type: str) -> tuple[int, int] | tuple[None, None]:
        """(instance index, distance) of the closest alive instance of the
        type; ties break row-major, then by instance index."""
        dist = self._distances_from(self.agent)
        best = None
        for k in range(len(self.inst_pos)):
            if not self.inst_alive[k] or self.inst_type[k] != target_type:
                continue
            d = int(dist[self.inst_pos[k]])
            if d < 0:
                continue
            key = (d, self.inst_pos[k][0], self.inst_pos[k][1], k)
            if best is None or key < best:
                best = key
        if best is None:
            return None, None
        return best[3], best[0]

    def _tick_objects(self) -> None:
        if self.config.freeze_stochastic or self.config.domain != "playground":
            return
        snap = MapSpec(
            self.map.height, self.map.width, self.map.domain, self.map.obstacles,
            tuple(
                ObjectInstance(self.inst_pos[k], self.inst_type[k])
                for k in range(len(self.inst_pos)) if self.inst_alive[k]
            ),
            self.agent,
        )
        moved = step_objects(snap, self.motion_rng)
        live = [k for k in range(len(self.inst_pos)) if self.inst_alive[k]]
        for k, ob in zip(live, moved.instances):
            self.inst_pos[k] = ob.pos

    def _step_towards(self, target_idx: int) -> None:
        """Advance the agent one cell along a shortest path to the target."""
        tgt = self.inst_pos[target_idx]
        dist = self._distances_from(tgt)
        r, c = self.agent
        best = None
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < self.map.height and 0 <= nc < self.map.width and self.passable[nr, nc]:
                d = int(dist[nr, nc])
                if d >= 0 and (best is None or d < best[0]):
                    best = (d, nr, nc)
        if best is not None and best[0] < int(dist[r, c]):
            self.agent = (best[1], best[2])

    # -- option execution ------------------------------------------------------

    def execute_option(self, subtask_id: int) -> OptionOutcome:
        """Walk to the option's target and interact; charges path length + 1
        steps, truncated by the remaining budget (aborts with reward 0)."""
        if self.state.remaining_steps <= 0:
            raise ValueError("episode budget already exhausted")
        opt = self.options[subtask_id]
        rem = self.state.remaining_steps
        steps = 0
        idx, d = self.nearest_instance(opt.target_type)
        if idx is None:
            # Executability gap: no instance of the target type on the map.
            steps = 1
            rem -= 1
            self._tick_objects()
            self.state = TaskState(self.state.completion, self.state.eligibility, rem)
            return OptionOutcome(subtask_id, steps, 0.0, False)
        while self.agent != self.inst_pos[idx]:
            if rem <= 0:
                self.state = TaskState(self.state.completion, self.state.eligibility, 0)
                return OptionOutcome(subtask_id, steps, 0.0, False)
            self._step_towards(idx)
            steps += 1
            rem -= 1
            self._tick_objects()
            if not self.config.freeze_stochastic:
                # Moving targets: re-aim at the (possibly new) nearest instance.
                nidx, _ = self.nearest_instance(opt.target_type)
                if nidx is not None:
                    idx = nidx
        if rem <= 0:
            self.state = TaskState(self.state.completion, self.state.eligibility, 0)
            return OptionOutcome(subtask_id, steps, 0.0, False)
        # Interaction primitive: one more step.
        steps += 1
        rem -= 1
        if opt.interaction == "pickup":
            self.inst_alive[idx] = False
        elif opt.interaction == "transform":
            self.inst_type[idx] = "Ice"
        eligible = self.state.eligibility[subtask_id] == 1
        if eligible:
            x = list(self.state.completion)
            x[subtask_id] = 1
            self.state = TaskState.from_completion(self.graph, x, rem)
            reward = self.graph.subtasks[subtask_id].reward
        else:
            self.state = TaskState(self.state.completion, self.state.eligibility, rem)
            reward = 0.0
        self._tick_objects()
        return OptionOutcome(subtask_id, steps, reward, eligible)

    def snapshot_map(self) -> MapSpec:
        return MapSpec(
            self.map.height, self.map.width, self.map.domain, self.map.obstacles,
            tuple(
                ObjectInstance(self.inst_pos[k], self.inst_type[k])
                for k in range(len(self.inst_pos)) if self.inst_alive[k]
            ),
            self.agent,
        )


def execute_option(
    graph: SubtaskGraph,
    map_spec: MapSpec,
    subtask_id: int,
    state: TaskState,
    rng: SplitMix64 | None = None,
    freeze: bool = True,
) -> tuple[MapSpec, TaskState, float, int]:
    """One-shot option execution on a map snapshot.

    Returns (new map, new state, reward, steps_used). The option pays the
    full movement cost whether or not the subtask is eligible.
    """
    config = EpisodeConfig(
        domain=map_spec.domain, graph=graph, seed=0, freeze_stochastic=freeze,
        map_height=map_spec.height, map_width=map_spec.width,
    )
    env = GridWorld(config, map_spec, state.remaining_steps, motion_rng=rng)
    env.state = state
    out = env.execute_option(subtask_id)
    return env.snapshot_map(), env.state, out.reward, out.steps


def episode_setup(config: EpisodeConfig) -> tuple[int, MapSpec, int, int]:
    """Derive (budget, initial map, policy seed, motion seed) from the
    episode seed. Shared by the Python environment and the kernels."""
    lo, hi = config.graph.step_budget_range
    root = SplitMix64(derive_seed(config.seed))
    budget = root.randint(lo, hi)
    map_seed = root.next_u64()
    policy_seed = root.next_u64()
    motion_seed = root.next_u64()
    map_spec = sample_map(config, np.random.default_rng(map_seed))
    return budget, map_spec, policy_seed, motion_seed


def run_episode(config: EpisodeConfig, policy, backend: str = "auto") -> EpisodeRecord:
    """Play one episode; terminates on budget exhaustion or when no subtask
    is eligible. Deterministic given (config, policy, seeds)."""
    from . import _kernels

    budget, map_spec, policy_seed, motion_seed = episode_setup(config)

    kernel_kind = getattr(policy, "kernel_kind", None)
    if backend == "auto":
        backend = (
            "kernel" if (config.freeze_stochastic and kernel_kind is not None) else "world"
        )
    if backend == "kernel":
        if not config.freeze_stochastic or kernel_kind is None:
            raise ConfigError("kernel backend requires freeze_stochastic and a kernel policy")
        return _kernels.run_episode_kernel(
            config, map_spec, budget, policy, policy_seed
        )

    env = GridWorld(config, map_spec, budget, motion_rng=SplitMix64(motion_seed))
    if hasattr(policy, "begin_episode"):
        policy.begin_episode(config, env, policy_seed)
    outcomes: list[OptionOutcome] = []
    while env.state.remaining_steps > 0 and any(env.state.eligibility):
        action = policy.choose(env)
        if action is None:
            break
        outcomes.append(env.execute_option(action))
    rewards = [o.reward for o in outcomes]
    return EpisodeRecord(
        policy=getattr(policy, "tag", policy.__class__.__name__),
        seed=config.seed,
        budget=budget,
        options=tuple(outcomes),
        final_completion=env.state.completion,
        total_return=episode_return(rewards),
        steps_used=sum(o.steps for o in outcomes),
        diagnostics=dict(getattr(policy, "diagnostics", lambda: {})()),
    )
