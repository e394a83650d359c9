"""Procedural subtask-graph generation.

Playground graphs are sampled layer by layer: each boundary gets a pool of
distinct AND nodes drawn from the lower layer's regular tasks, each upper
task picks a disjunction of pool nodes, and distractors receive only negated
parent connections. Counts are sampled per graph from preset ranges.

Mining graphs are subgraphs of a fixed 26-subtask crafting template obtained
by repeatedly deleting parentless subtasks outside a protected keep-set.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import domains
from .graphs import AndNode, GraphStructureError, SubtaskGraph, SubtaskSpec

_RETRY = 100


class GenerationError(RuntimeError):
    """Raised when a parameter combination cannot be satisfied."""


Range = tuple[int, int]
FRange = tuple[float, float]


@dataclass(frozen=True)
class GenParams:
    """Layered generator parameters.

    `n_tasks_per_layer[l]` counts all subtasks at layer l including the
    `n_distractors_per_layer[l]` distractors among them. Boundary-indexed
    ranges (AND pool size, AND children, OR children) have one entry per
    adjacent layer pair; rewards and distractor-parent counts are per layer.
    """

    n_tasks_per_layer: tuple[int, ...]
    n_distractors_per_layer: tuple[int, ...]
    n_and_per_layer: tuple[Range, ...]
    n_and_children_pos: tuple[Range, ...]
    n_and_children_neg: tuple[Range, ...]
    n_distractor_neg_parents: tuple[Range, ...]
    n_or_children: tuple[Range, ...]
    reward_per_layer: tuple[FRange, ...]
    step_budget_range: Range
    seed: int | None = None

    def __post_init__(self):
        L = len(self.n_tasks_per_layer)
        if L < 1:
            raise ValueError("need at least one layer")
        for name in ("n_distractors_per_layer", "reward_per_layer", "n_distractor_neg_parents"):
            if len(getattr(self, name)) != L:
                raise ValueError(f"{name} must have one entry per layer ({L})")
        for name in ("n_and_per_layer", "n_and_children_pos", "n_and_children_neg", "n_or_children"):
            if len(getattr(self, name)) != L - 1:
                raise ValueError(f"{name} must have one entry per layer boundary ({L - 1})")
        for nd, nt in zip(self.n_distractors_per_layer, self.n_tasks_per_layer):
            if not (0 <= nd <= nt):
                raise ValueError("distractor counts must satisfy 0 <= N_D <= N_T per layer")
        for name in (
            "n_and_per_layer", "n_and_children_pos", "n_and_children_neg",
            "n_distractor_neg_parents", "n_or_children", "reward_per_layer",
        ):
            for lo, hi in getattr(self, name):
                if lo > hi:
                    raise ValueError(f"{name} contains an empty range ({lo}, {hi})")
        lo, hi = self.step_budget_range
        if not (0 < lo <= hi):
            raise ValueError("step_budget_range must satisfy 0 < lo <= hi")

    @property
    def n_layers(self) -> int:
        return len(self.n_tasks_per_layer)

    @property
    def n_subtasks(self) -> int:
        return sum(self.n_tasks_per_layer)


_D_REWARDS = ((0.1, 0.2), (0.3, 0.4), (0.7, 0.9), (1.8, 2.0))

_BASE = GenParams(
    n_tasks_per_layer=(4, 3, 2, 1),
    n_distractors_per_layer=(0, 0, 0, 0),
    n_and_per_layer=((3, 4), (3, 3), (2, 3)),
    n_and_children_pos=((1, 3), (1, 2), (2, 2)),
    n_and_children_neg=((0, 0), (0, 0), (0, 0)),
    n_distractor_neg_parents=((0, 0), (0, 0), (0, 0), (0, 0)),
    n_or_children=((1, 2), (1, 2), (1, 2)),
    reward_per_layer=_D_REWARDS,
    step_budget_range=(40, 60),
)

PRESETS: dict[str, GenParams] = {
    "D1": GenParams(
        n_tasks_per_layer=(6, 4, 2, 1),
        n_distractors_per_layer=(2, 1, 0, 0),
        n_and_per_layer=((3, 5), (3, 4), (2, 2)),
        n_and_children_pos=((1, 3), (1, 3), (1, 3)),
        n_and_children_neg=((0, 2), (0, 2), (0, 1)),
        n_distractor_neg_parents=((0, 3), (0, 3), (0, 0), (0, 0)),
        n_or_children=((1, 2), (1, 2), (1, 2)),
        reward_per_layer=_D_REWARDS,
        step_budget_range=(48, 72),
    ),
    "D2": GenParams(
        n_tasks_per_layer=(7, 5, 2, 1),
        n_distractors_per_layer=(2, 2, 0, 0),
        n_and_per_layer=((4, 5), (3, 4), (2, 2)),
        n_and_children_pos=((1, 3), (1, 3), (1, 3)),
        n_and_children_neg=((0, 2), (0, 2), (0, 1)),
        n_distractor_neg_parents=((0, 3), (0, 3), (0, 0), (0, 0)),
        n_or_children=((1, 2), (1, 2), (1, 2)),
        reward_per_layer=_D_REWARDS,
        step_budget_range=(52, 78),
    ),
    "D3": GenParams(
        n_tasks_per_layer=(5, 4, 4, 2, 1),
        n_distractors_per_layer=(1, 1, 1, 0, 0),
        n_and_per_layer=((3, 5), (3, 4), (3, 4), (2, 2)),
        n_and_children_pos=((1, 3), (1, 3), (1, 3), (1, 3)),
        n_and_children_neg=((0, 2), (0, 2), (0, 1), (0, 1)),
        n_distractor_neg_parents=((0, 3), (0, 3), (0, 3), (0, 0), (0, 0)),
        n_or_children=((1, 2), (1, 2), (1, 2), (1, 2)),
        reward_per_layer=((0.1, 0.2), (0.3, 0.4), (0.6, 0.7), (1.0, 1.2), (2.0, 2.2)),
        step_budget_range=(56, 84),
    ),
    "D4": GenParams(
        n_tasks_per_layer=(4, 3, 3, 3, 2, 1),
        n_distractors_per_layer=(0, 0, 0, 0, 0, 0),
        n_and_per_layer=((3, 5), (3, 4), (3, 4), (3, 4), (2, 2)),
        n_and_children_pos=((1, 3), (1, 3), (1, 3), (1, 3), (1, 3)),
        n_and_children_neg=((0, 2), (0, 2), (0, 1), (0, 1), (0, 0)),
        n_distractor_neg_parents=((0, 0),) * 6,
        n_or_children=((1, 2),) * 5,
        reward_per_layer=(
            (0.1, 0.2), (0.3, 0.4), (0.6, 0.7), (1.0, 1.2), (1.4, 1.6), (2.4, 2.6),
        ),
        step_budget_range=(56, 84),
    ),
    "Base": _BASE,
    "Base-OR": replace(_BASE, n_or_children=((1, 1), (1, 1), (1, 1))),
    "Base+Distractor": replace(_BASE, n_distractors_per_layer=(2, 1, 0, 0)),
    "Base+NOT": replace(
        _BASE,
        n_and_children_pos=((0, 3), (0, 2), (0, 2)),
        n_and_children_neg=((0, 2), (0, 2), (0, 1)),
    ),
    "Base+NegDistractor": replace(
        _BASE,
        n_distractors_per_layer=(2, 1, 0, 0),
        n_distractor_neg_parents=((0, 3), (0, 3), (0, 0), (0, 0)),
    ),
    "Base+Delayed": replace(
        _BASE,
        reward_per_layer=((0.0, 0.0), (0.0, 0.0), (0.0, 0.0), (1.6, 1.8)),
    ),
}


def preset(name: str) -> GenParams:
    """Named generator parameter block."""
    try:
        return PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {sorted(PRESETS)}") from None


def _rng_for(params: GenParams, rng) -> np.random.Generator:
    if rng is not None:
        return rng
    return np.random.default_rng(params.seed)


def generate_playground_graph(params: GenParams, rng=None) -> SubtaskGraph:
    """Sample one layered graph; deterministic for a given (params, seed)."""
    rng = _rng_for(params, rng)
    L = params.n_layers

    # Subtask ids layer by layer, regular tasks before distractors.
    regular: list[list[int]] = []
    distract: list[list[int]] = []
    layers: list[int] = []
    next_id = 0
    for l in range(L):
        nt = params.n_tasks_per_layer[l]
        nd = params.n_distractors_per_layer[l]
        reg = list(range(next_id, next_id + nt - nd))
        dis = list(range(next_id + nt - nd, next_id + nt))
        regular.append(reg)
        distract.append(dis)
        layers.extend([l] * nt)
        next_id += nt
    n = next_id

    and_nodes: list[AndNode] = []
    or_children: list[tuple[int, ...]] = [()] * n
    pool_by_boundary: list[list[int]] = []

    for b in range(L - 1):  # boundary b feeds layer b+1
        src = regular[b]
        targets = regular[b + 1]
        if not targets:
            pool_by_boundary.append([])
            continue
        if not src:
            raise GenerationError(
                f"layer {b} has no regular tasks to serve as AND children for layer {b + 1}"
            )
        na_lo, na_hi = params.n_and_per_layer[b]
        oc_lo, oc_hi = params.n_or_children[b]
        lo = max(na_lo, oc_lo)  # every pool node may go unused; still need >= oc_lo per pick
        hi = na_hi
        if lo > hi:
            raise GenerationError(
                f"boundary {b}: AND pool range {params.n_and_per_layer[b]} cannot cover "
                f"OR-children range {params.n_or_children[b]}"
            )
        n_a = int(rng.integers(lo, hi + 1))

        pos_lo, pos_hi = params.n_and_children_pos[b]
        neg_lo, neg_hi = params.n_and_children_neg[b]
        pos_hi_eff = min(pos_hi, len(src))
        if pos_lo > pos_hi_eff:
            raise GenerationError(
                f"boundary {b}: N_ac+ lower bound {pos_lo} exceeds the {len(src)} "
                f"regular tasks available in layer {b}"
            )
        # Pool of AND nodes. Distinct children sets are preferred (retried)
        # but only *per subtask* is distinctness mandatory; every regular
        # source task must serve as a positive child somewhere, or it would
        # extensionally become a distractor and break the N_D accounting.
        pool: list[int] = []
        pool_children: list[tuple] = []
        for _pool_attempt in range(_RETRY + 1):
            pool_children = []
            seen_children: set[frozenset] = set()
            for _ in range(n_a):
                children = None
                for _attempt in range(_RETRY + 1):
                    n_pos = int(rng.integers(pos_lo, pos_hi_eff + 1))
                    neg_cap = min(neg_hi, len(src) - n_pos)
                    if neg_cap < neg_lo:
                        raise GenerationError(
                            f"boundary {b}: N_ac- lower bound {neg_lo} cannot be met "
                            f"with {len(src)} regular tasks and {n_pos} positive children"
                        )
                    n_neg = int(rng.integers(neg_lo, neg_cap + 1))
                    if n_pos + n_neg == 0:
                        continue
                    picks = rng.choice(len(src), size=n_pos + n_neg, replace=False)
                    children = tuple(
                        sorted(
                            [(src[k], False) for k in picks[:n_pos]]
                            + [(src[k], True) for k in picks[n_pos:]]
                        )
                    )
                    if frozenset(children) not in seen_children:
                        break
                if children is None:
                    raise GenerationError(
                        f"boundary {b}: could not sample a non-empty AND node"
                    )
                seen_children.add(frozenset(children))
                pool_children.append(children)
            covered = {c for ch in pool_children for c, neg in ch if not neg}
            if all(t in covered for t in src):
                break
        else:
            raise GenerationError(
                f"boundary {b}: could not cover every layer-{b} task with a "
                f"positive AND child within the retry budget"
            )
        for children in pool_children:
            aid = len(and_nodes)
            and_nodes.append(AndNode(aid, children))
            pool.append(aid)
        keys = [frozenset(ch) for ch in pool_children]
        n_keys = len(set(keys))
        if oc_lo > n_keys:
            raise GenerationError(
                f"boundary {b}: N_oc lower bound {oc_lo} exceeds the {n_keys} "
                f"distinct AND nodes available (duplicated AND nodes with the "
                f"same children are forbidden under one subtask)"
            )
        for t in targets:
            n_oc = int(rng.integers(oc_lo, min(oc_hi, n_keys) + 1))
            order = rng.permutation(n_a)
            chosen: list[int] = []
            used_keys: set[frozenset] = set()
            for k in order:
                if keys[k] in used_keys:
                    continue
                chosen.append(int(k))
                used_keys.add(keys[k])
                if len(chosen) == n_oc:
                    break
            or_children[t] = tuple(pool[k] for k in sorted(chosen))
        pool_by_boundary.append(pool)

    # Distractors: only negated parent connections, drawn from the AND pool
    # one boundary above their own layer.
    for l in range(L):
        dp_lo, dp_hi = params.n_distractor_neg_parents[l]
        for d in distract[l]:
            pool = pool_by_boundary[l] if l < L - 1 else []
            cap = min(dp_hi, len(pool))
            if dp_lo > cap:
                raise GenerationError(
                    f"layer {l}: a distractor needs at least {dp_lo} negated parents but "
                    f"only {len(pool)} AND nodes exist above it"
                )
            n_dp = int(rng.integers(dp_lo, cap + 1))
            if n_dp == 0:
                continue
            for attempt in range(_RETRY + 1):
                picks = rng.choice(len(pool), size=n_dp, replace=False)
                staged: dict[int, AndNode] = {}
                for k in picks:
                    aid = pool[k]
                    node = and_nodes[aid]
                    staged[aid] = AndNode(aid, tuple(sorted(node.children + ((d, True),))))
                # dedup scope is per subtask: no target may end up holding
                # two disjuncts with identical children
                ok = True
                for t in regular[l + 1] if l + 1 < L else []:
                    keys = [
                        frozenset(staged.get(aid, and_nodes[aid]).children)
                        for aid in or_children[t]
                    ]
                    if len(set(keys)) != len(keys):
                        ok = False
                        break
                if ok:
                    for aid, new in staged.items():
                        and_nodes[aid] = new
                    break
            else:
                raise GenerationError(
                    f"layer {l}: distractor wiring kept colliding with the AND dedup rule"
                )

    # Rewards per layer; option labels sampled without replacement while the
    # catalog lasts (reuse beyond 16 subtasks is allowed but rare).
    rewards = []
    for l in range(L):
        r_lo, r_hi = params.reward_per_layer[l]
        for _ in range(params.n_tasks_per_layer[l]):
            rewards.append(float(rng.uniform(r_lo, r_hi)) if r_hi > r_lo else float(r_lo))
    options = list(domains.PLAYGROUND_OPTIONS)
    if n <= len(options):
        picks = rng.choice(len(options), size=n, replace=False)
    else:
        head = rng.permutation(len(options))
        extra = rng.integers(0, len(options), size=n - len(options))
        picks = np.concatenate([head, extra])
    labels = [f"{options[k][0]}:{options[k][1]}" for k in picks]

    subtasks = tuple(
        SubtaskSpec(i, labels[i], layers[i], rewards[i]) for i in range(n)
    )
    try:
        return SubtaskGraph(
            n_subtasks=n,
            subtasks=subtasks,
            and_nodes=tuple(and_nodes),
            or_children=tuple(or_children),
            step_budget_range=tuple(params.step_budget_range),
        )
    except GraphStructureError as exc:
        raise GenerationError(f"generated graph failed validation: {exc}") from exc


# -- Mining ------------------------------------------------------------------


def mining_template() -> SubtaskGraph:
    """The canonical 26-subtask crafting template."""
    defs = domains.MINING_SUBTASKS
    index = {m.letter: i for i, m in enumerate(defs)}

    layer_of: dict[str, int] = {}

    def layer(letter: str) -> int:
        if letter not in layer_of:
            m = domains.MINING_BY_LETTER[letter]
            deps = [c for disjunct in m.recipe for c in disjunct]
            layer_of[letter] = 0 if not deps else 1 + max(layer(c) for c in deps)
        return layer_of[letter]

    and_nodes: list[AndNode] = []
    or_children: list[tuple[int, ...]] = []
    for m in defs:
        ids = []
        for disjunct in m.recipe:
            aid = len(and_nodes)
            and_nodes.append(
                AndNode(aid, tuple(sorted((index[c], False) for c in disjunct)))
            )
            ids.append(aid)
        or_children.append(tuple(ids))

    subtasks = tuple(
        SubtaskSpec(i, m.letter, layer(m.letter), m.reward) for i, m in enumerate(defs)
    )
    return SubtaskGraph(
        n_subtasks=len(defs),
        subtasks=subtasks,
        and_nodes=tuple(and_nodes),
        or_children=tuple(or_children),
        step_budget_range=domains.MINING_STEP_BUDGET,
    )


def _valid_removal_sets(template: SubtaskGraph) -> list[int]:
    """Bitmasks over removable letters closed under parent removal."""
    keep = {i for i, s in enumerate(template.subtasks) if s.label in domains.MINING_KEEP}
    removable = [i for i in range(template.n_subtasks) if i not in keep]
    pos = {i: k for k, i in enumerate(removable)}
    parents: list[list[int]] = [[] for _ in removable]
    blocked = [False] * len(removable)
    for i in range(template.n_subtasks):
        for aid in template.or_children[i]:
            for child, _neg in template.and_node(aid).children:
                if child in pos:
                    if i in keep:
                        blocked[pos[child]] = True
                    elif i in pos:
                        parents[pos[child]].append(pos[i])
    valid = []
    for mask in range(1 << len(removable)):
        ok = True
        for k in range(len(removable)):
            if mask >> k & 1:
                if blocked[k] or any(not (mask >> p & 1) for p in parents[k]):
                    ok = False
                    break
        if ok:
            valid.append(mask)
    return valid


def _extract_subgraph(template: SubtaskGraph, removed: set[int], rng) -> SubtaskGraph:
    present = [i for i in range(template.n_subtasks) if i not in removed]
    remap = {old: new for new, old in enumerate(present)}
    and_nodes: list[AndNode] = []
    or_children: list[tuple[int, ...]] = []
    for old in present:
        ids = []
        for aid in template.or_children[old]:
            node = template.and_node(aid)
            new_aid = len(and_nodes)
            and_nodes.append(
                AndNode(new_aid, tuple((remap[c], neg) for c, neg in node.children))
            )
            ids.append(new_aid)
        or_children.append(tuple(ids))
    n = len(present)
    scale = rng.uniform(0.8, 1.2, size=n)
    subtasks = tuple(
        SubtaskSpec(
            new,
            template.subtasks[old].label,
            template.subtasks[old].layer,
            float(template.subtasks[old].reward * scale[new]),
        )
        for new, old in enumerate(present)
    )
    lo0, hi0 = template.step_budget_range
    full = template.n_subtasks
    lo = max(24, round(lo0 * n / full))
    hi = max(lo + 6, round(hi0 * n / full))
    return SubtaskGraph(n, subtasks, tuple(and_nodes), tuple(or_children), (lo, hi))


def enumerate_mining_subgraphs(
    template: SubtaskGraph, rng, count: int = 640
) -> list[SubtaskGraph]:
    """Sample `count` distinct subgraphs (parentless deletions outside the
    keep-set), each with per-subtask rewards rescaled by 0.8-1.2."""
    keep = {i for i, s in enumerate(template.subtasks) if s.label in domains.MINING_KEEP}
    removable = [i for i in range(template.n_subtasks) if i not in keep]
    masks = _valid_removal_sets(template)
    if count > len(masks):
        raise GenerationError(
            f"template admits only {len(masks)} distinct subgraphs, {count} requested"
        )
    masks.sort(key=lambda m: (bin(m).count("1"), m))
    chosen = rng.choice(len(masks), size=count, replace=False)
    out = []
    for k in chosen:
        mask = masks[int(k)]
        removed = {removable[j] for j in range(len(removable)) if mask >> j & 1}
        out.append(_extract_subgraph(template, removed, rng))
    return out
