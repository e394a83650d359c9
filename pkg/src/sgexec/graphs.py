"""AND-OR-NOT subtask graphs: exact eligibility, completion updates, rewards.

A subtask graph assigns every subtask a reward and a precondition in
sum-of-products form: a disjunction (OR) over AND nodes, each AND node a
conjunction over possibly negated completion literals of lower-layer
subtasks. A subtask is *eligible* when its precondition is satisfied and it
has never been executed; executing an eligible subtask pays its reward once
and marks it complete.

Graphs are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import cached_property


class GraphStructureError(ValueError):
    """Raised on malformed graphs or structurally invalid arguments."""


@dataclass(frozen=True)
class AndNode:
    """Conjunction over (subtask_id, negated) completion literals."""

    id: int
    children: tuple[tuple[int, bool], ...]


@dataclass(frozen=True)
class SubtaskSpec:
    id: int
    label: str
    layer: int
    reward: float


@dataclass(frozen=True)
class SubtaskGraph:
    """Layered AND-OR-NOT dependency structure over N subtasks.

    `or_children[i]` lists the AND-node ids whose disjunction forms subtask
    i's precondition; an empty list means the precondition is always
    satisfied (a base-layer subtask or a distractor).
    """

    n_subtasks: int
    subtasks: tuple[SubtaskSpec, ...]
    and_nodes: tuple[AndNode, ...]
    or_children: tuple[tuple[int, ...], ...]
    step_budget_range: tuple[int, int]

    def __post_init__(self):
        self.validate()

    # -- structure ---------------------------------------------------------

    @property
    def rewards(self) -> tuple[float, ...]:
        return tuple(s.reward for s in self.subtasks)

    @property
    def layers(self) -> tuple[int, ...]:
        return tuple(s.layer for s in self.subtasks)

    @cached_property
    def _and_index(self) -> dict[int, int]:
        return {a.id: k for k, a in enumerate(self.and_nodes)}

    def and_node(self, and_id: int) -> AndNode:
        return self.and_nodes[self._and_index[and_id]]

    @cached_property
    def _positive_children(self) -> frozenset[int]:
        return frozenset(
            child for a in self.and_nodes for child, neg in a.children if not neg
        )

    def parent_edges(self, subtask_id: int) -> list[tuple[int, int, bool]]:
        """(parent_subtask, and_id, negated) edges whose AND node contains
        `subtask_id` as a child."""
        out = []
        for i in range(self.n_subtasks):
            for aid in self.or_children[i]:
                for child, neg in self.and_node(aid).children:
                    if child == subtask_id:
                        out.append((i, aid, neg))
        return out

    def distractors(self) -> frozenset[int]:
        """Precondition-free subtasks whose parent connections are all
        negated (or absent). Executing one can pay an immediate reward while
        disabling other subtasks."""
        return frozenset(
            i
            for i in range(self.n_subtasks)
            if not self.or_children[i] and i not in self._positive_children
        )

    def validate(self) -> None:
        n = self.n_subtasks
        if len(self.subtasks) != n or len(self.or_children) != n:
            raise GraphStructureError("subtask list lengths disagree with n_subtasks")
        for i, s in enumerate(self.subtasks):
            if s.id != i:
                raise GraphStructureError(f"subtask ids must be dense 0..N-1, got {s.id} at {i}")
            if s.layer < 0:
                raise GraphStructureError(f"negative layer on subtask {i}")
        and_ids = [a.id for a in self.and_nodes]
        if len(set(and_ids)) != len(and_ids):
            raise GraphStructureError("duplicate AND-node ids")
        known = set(and_ids)
        for a in self.and_nodes:
            if not a.children:
                raise GraphStructureError(f"AND node {a.id} has no children")
            seen = set()
            for child, _neg in a.children:
                if not (0 <= child < n):
                    raise GraphStructureError(f"AND node {a.id} references unknown subtask {child}")
                if child in seen:
                    raise GraphStructureError(f"AND node {a.id} repeats child {child}")
                seen.add(child)
        for i, ands in enumerate(self.or_children):
            keys = set()
            for aid in ands:
                if aid not in known:
                    raise GraphStructureError(f"or_children[{i}] references unknown AND node {aid}")
                node = self.and_node(aid)
                for child, _neg in node.children:
                    if self.subtasks[child].layer >= self.subtasks[i].layer:
                        raise GraphStructureError(
                            f"layering violated: subtask {child} (layer "
                            f"{self.subtasks[child].layer}) feeds subtask {i} "
                            f"(layer {self.subtasks[i].layer})"
                        )
                key = frozenset(node.children)
                if key in keys:
                    raise GraphStructureError(
                        f"duplicated AND nodes with the same children under subtask {i}"
                    )
                keys.add(key)
        # A precondition-free subtask above the base layer must be a
        # distractor: nothing may depend on it positively.
        for i, ands in enumerate(self.or_children):
            if not ands and self.subtasks[i].layer > 0 and i in self._positive_children:
                raise GraphStructureError(
                    f"subtask {i} has an empty precondition above layer 0 but is not a distractor"
                )
        lo, hi = self.step_budget_range
        if not (0 <= lo <= hi):
            raise GraphStructureError("step_budget_range must satisfy 0 <= lo <= hi")

    # -- serialization (field names normative) ------------------------------

    def to_json_dict(self) -> dict:
        return {
            "version": 1,
            "n_subtasks": self.n_subtasks,
            "subtasks": [
                {"id": s.id, "label": s.label, "layer": s.layer, "reward": s.reward}
                for s in self.subtasks
            ],
            "and_nodes": [
                {
                    "id": a.id,
                    "children": [
                        {"subtask": child, "negated": bool(neg)} for child, neg in a.children
                    ],
                }
                for a in self.and_nodes
            ],
            "or_children": {str(i): list(self.or_children[i]) for i in range(self.n_subtasks)},
            "step_budget_range": list(self.step_budget_range),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, doc: dict) -> "SubtaskGraph":
        try:
            n = int(doc["n_subtasks"])
            subtasks = tuple(
                SubtaskSpec(int(s["id"]), str(s["label"]), int(s["layer"]), float(s["reward"]))
                for s in doc["subtasks"]
            )
            and_nodes = tuple(
                AndNode(
                    int(a["id"]),
                    tuple((int(c["subtask"]), bool(c["negated"])) for c in a["children"]),
                )
                for a in doc["and_nodes"]
            )
            or_children = tuple(
                tuple(int(aid) for aid in doc["or_children"].get(str(i), ()))
                for i in range(n)
            )
            lo, hi = doc["step_budget_range"]
        except (KeyError, TypeError, ValueError) as exc:
            raise GraphStructureError(f"malformed graph document: {exc}") from exc
        return cls(n, subtasks, and_nodes, or_children, (int(lo), int(hi)))

    @classmethod
    def loads(cls, text: str) -> "SubtaskGraph":
        return cls.from_json_dict(json.loads(text))

    def canonical_structure_hash(self) -> str:
        """Hash of the precondition structure (layers, edges, negations).

        Rewards, labels, and budgets are excluded so the hash distinguishes
        *structurally* distinct graphs.
        """
        parts = [str(self.n_subtasks)]
        for i in range(self.n_subtasks):
            disjuncts = sorted(
                sorted((child, int(neg)) for child, neg in self.and_node(aid).children)
                for aid in self.or_children[i]
            )
            parts.append(f"{i}:{self.subtasks[i].layer}:{disjuncts}")
        return hashlib.sha256("|".join(parts).encode()).hexdigest()


@dataclass(frozen=True)
class TaskState:
    """Completion vector, derived eligibility vector, remaining budget."""

    completion: tuple[int, ...]
    eligibility: tuple[int, ...]
    remaining_steps: int

    @classmethod
    def initial(cls, graph: SubtaskGraph, remaining_steps: int) -> "TaskState":
        return cls.from_completion(graph, (0,) * graph.n_subtasks, remaining_steps)

    @classmethod
    def from_completion(
        cls, graph: SubtaskGraph, completion, remaining_steps: int
    ) -> "TaskState":
        x = tuple(int(bool(v)) for v in completion)
        return cls(x, compute_eligibility(graph, x), remaining_steps)


def compute_eligibility(graph: SubtaskGraph, completion) -> tuple[int, ...]:
    """Exact eligibility: precondition satisfied AND never executed.

    The precondition is an OR over AND nodes; each AND node conjoins
    x_k (non-negated child) or 1-x_k (negated child). An empty disjunction
    counts as satisfied.
    """
    n = graph.n_subtasks
    if len(completion) != n:
        raise GraphStructureError(
            f"completion vector has length {len(completion)}, expected {n}"
        )
    x = [int(bool(v)) for v in completion]
    elig = []
    for i in range(n):
        ands = graph.or_children[i]
        if not ands:
            pre = 1
        else:
            pre = 0
            for aid in ands:
                node = graph.and_node(aid)
                ok = 1
                for child, neg in node.children:
                    lit = (1 - x[child]) if neg else x[child]
                    if not lit:
                        ok = 0
                        break
                if ok:
                    pre = 1
                    break
        elig.append(pre & (1 - x[i]))
    return tuple(elig)


def execute_subtask(
    graph: SubtaskGraph, state: TaskState, subtask_id: int, duration: int = 1
) -> tuple[TaskState, float]:
    """Apply one subtask execution to the task state.

    If the subtask is eligible it completes and pays its reward; otherwise
    completion and reward are unchanged. `duration` is the caller-supplied
    step cost (the environment owns spatial cost).
    """
    if not (0 <= subtask_id < graph.n_subtasks):
        raise GraphStructureError(f"subtask id {subtask_id} out of range")
    if state.remaining_steps <= 0:
        raise ValueError("cannot execute a subtask with no remaining budget")
    remaining = max(0, state.remaining_steps - duration)
    if state.eligibility[subtask_id]:
        x = list(state.completion)
        x[subtask_id] = 1
        new = TaskState.from_completion(graph, x, remaining)
        return new, graph.subtasks[subtask_id].reward
    return TaskState(state.completion, state.eligibility, remaining), 0.0


def episode_return(rewards) -> float:
    """Undiscounted sum of per-step rewards."""
    return float(sum(rewards))
