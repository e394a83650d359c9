"""Reward propagation over smoothed subtask graphs.

Boolean AND/OR gates are replaced by scaled sigmoid/tanh surrogates so the
surrogate utility U = r.(x + e_smooth)/2 becomes differentiable in the
completion vector. The gradient of U charges each subtask with the reward
of the parents it would help unlock; composing that one-hop gradient down
the layered graph propagates reward information to every connected subtask
(so the policy still acts when only top-layer subtasks pay reward). The
policy is the (masked) argmax or softmax of the propagated scores.

smoothed_eligibility itself stays one hop: e_smooth is a function of the
literal completion vector, not of recursively smoothed lower layers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .graphs import SubtaskGraph, TaskState


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@dataclass(frozen=True)
class SmoothParams:
    """Gate-surrogate hyperparameters: OR is alpha_or*tanh(sum/beta_or),
    AND is alpha_and*sigmoid((sum - count + 0.5)/beta_and)."""

    alpha_or: float
    beta_or: float
    alpha_and: float
    beta_and: float

    def __post_init__(self):
        for name in ("alpha_or", "beta_or", "alpha_and", "beta_and"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be strictly positive")


# alpha_and = 1/sigmoid(0.25) in both published configurations.
_ALPHA_AND = 1.0 + math.exp(-0.25)

PLAYGROUND_SMOOTH = SmoothParams(alpha_or=1.0, beta_or=1.5, alpha_and=_ALPHA_AND, beta_and=0.5)
MINING_SMOOTH = SmoothParams(alpha_or=1.0, beta_or=2.0, alpha_and=_ALPHA_AND, beta_and=0.6)

DEFAULT_SMOOTH = {"playground": PLAYGROUND_SMOOTH, "mining": MINING_SMOOTH}


def smoothed_and(inputs, p: SmoothParams) -> float:
    """Soft conjunction of literal values in [0, 1]."""
    if len(inputs) == 0:
        raise ValueError("smoothed_and requires at least one input")
    arg = float(sum(inputs)) - len(inputs) + 0.5
    return p.alpha_and / (1.0 + math.exp(-arg / p.beta_and))


def smoothed_or(inputs, p: SmoothParams) -> float:
    """Soft disjunction of soft-AND outputs."""
    if len(inputs) == 0:
        raise ValueError("smoothed_or requires at least one input")
    return p.alpha_or * math.tanh(float(sum(inputs)) / p.beta_or)


@dataclass
class SmoothedEval:
    """Smoothed eligibility, AND-node outputs, Jacobian, utility, scores."""

    e_tilde: np.ndarray
    y_and: np.ndarray
    jacobian: np.ndarray | None
    utility: float
    scores: np.ndarray | None


@lru_cache(maxsize=512)
def _flat_edges(graph: SubtaskGraph):
    """Graph flattened to edge arrays for vectorized evaluation.

    AND nodes are duplicated per OR-parent so a node shared between parents
    contributes to each parent's disjunction independently.
    """
    parents = []   # subtask owning each flattened AND term
    and_sizes = []
    edge_child = []
    edge_sign = []  # +1 non-negated, -1 negated
    edge_term = []  # flattened AND-term index of each edge
    term = 0
    for i in range(graph.n_subtasks):
        for aid in graph.or_children[i]:
            node = graph.and_node(aid)
            parents.append(i)
            and_sizes.append(len(node.children))
            for child, neg in node.children:
                edge_child.append(child)
                edge_sign.append(-1.0 if neg else 1.0)
                edge_term.append(term)
            term += 1
    return (
        np.asarray(parents, dtype=np.int64),
        np.asarray(and_sizes, dtype=np.float64),
        np.asarray(edge_child, dtype=np.int64),
        np.asarray(edge_sign, dtype=np.float64),
        np.asarray(edge_term, dtype=np.int64),
    )


def smoothed_eligibility(
    graph: SubtaskGraph, completion, p: SmoothParams, with_gradient: bool = False
) -> SmoothedEval:
    """Evaluate the smoothed graph at a real-valued completion vector.

    Precondition-free subtasks get a constant smoothed eligibility of 1 with
    zero gradient (their exact eligibility is constantly true).
    """
    n = graph.n_subtasks
    x = np.asarray(completion, dtype=np.float64)
    if x.shape != (n,):
        raise ValueError(f"completion must have shape ({n},)")
    parents, and_sizes, edge_child, edge_sign, edge_term = _flat_edges(graph)
    r = np.asarray(graph.rewards, dtype=np.float64)

    m = len(and_sizes)
    e_tilde = np.ones(n, dtype=np.float64)
    if m == 0:
        util = float(r @ (x + e_tilde) / 2.0)
        jac = np.zeros((n, n)) if with_gradient else None
        scores = (0.5 * r) if with_gradient else None
        return SmoothedEval(e_tilde, np.zeros(0), jac, util, scores)

    xhat = np.where(edge_sign > 0, x[edge_child], 1.0 - x[edge_child])
    term_sum = np.bincount(edge_term, weights=xhat, minlength=m)
    and_arg = (term_sum - and_sizes + 0.5) / p.beta_and
    sig = _sigmoid(and_arg)
    y_and = p.alpha_and * sig

    or_sum = np.bincount(parents, weights=y_and, minlength=n)
    has_pre = np.bincount(parents, minlength=n) > 0
    th = np.tanh(or_sum / p.beta_or)
    e_tilde = np.where(has_pre, p.alpha_or * th, 1.0)

    utility = float(r @ (x + e_tilde) / 2.0)

    jac = None
    scores = None
    if with_gradient:
        d_or = np.where(has_pre, (p.alpha_or / p.beta_or) * (1.0 - th * th), 0.0)
        d_and = (p.alpha_and / p.beta_and) * sig * (1.0 - sig)
        # d e_i / d x_k = d_or[i] * sum over AND terms j under i containing k
        # of d_and[j] * sign(j,k)
        contrib = d_or[parents[edge_term]] * d_and[edge_term] * edge_sign
        jac = np.zeros((n, n), dtype=np.float64)
        np.add.at(jac, (parents[edge_term], edge_child), contrib)
        scores = 0.5 * r + 0.5 * (r @ jac)
    return SmoothedEval(np.asarray(e_tilde), y_and, jac, utility, scores)


def grprop_scores(graph: SubtaskGraph, state, p: SmoothParams) -> np.ndarray:
    """Per-subtask scores from propagating reward down the smoothed graph.

    Each subtask's score starts at half its own reward; on top of that,
    every subtask repeatedly passes its propagated value down to its
    precondition children, split in proportion to the one-hop smoothed
    sensitivities (negated children receive negative shares). The series is
    finite because the layered influence matrix is nilpotent. Subtasks with
    no preconditions propagate nothing, so an all-leaf graph degenerates to
    reward/2; on deep graphs every subtask connected to a reward receives a
    non-zero contribution, which is what lets the policy act under fully
    delayed rewards and skip distractors whose victims sit many layers up.
    `state` may be a TaskState or a completion vector.
    """
    completion = getattr(state, "completion", state)
    ev = smoothed_eligibility(graph, completion, p, with_gradient=True)
    r = np.asarray(graph.rewards, dtype=np.float64)
    # Row-normalize the Jacobian so each subtask distributes its propagated
    # value among its precondition children in proportion to the smoothed
    # sensitivities; pure chain-rule products decay geometrically with depth
    # and would starve long chains of reward signal.
    row = np.abs(ev.jacobian).sum(axis=1)
    shares = np.divide(
        ev.jacobian, row[:, None], out=np.zeros_like(ev.jacobian), where=row[:, None] > 0
    )
    acc = r.copy()
    v = r
    for _ in range(graph.n_subtasks):
        v = shares.T @ v
        if not np.any(v):
            break
        acc += v
    return 0.5 * acc


def grprop_policy(
    graph: SubtaskGraph,
    state: TaskState,
    p: SmoothParams,
    mode: str = "argmax",
    temperature: float = 1.0,
    rng=None,
) -> int | None:
    """Pick an eligible subtask by score; None when nothing is eligible.

    argmax mode breaks ties toward the lowest subtask id; sample mode draws
    from a softmax over the eligible scores at the given temperature.
    """
    elig = np.asarray(state.eligibility, dtype=bool)
    if not elig.any():
        return None
    scores = grprop_scores(graph, state, p)
    if mode == "argmax":
        masked = np.where(elig, scores, -np.inf)
        return int(np.argmax(masked))
    if mode == "sample":
        if rng is None:
            raise ValueError("sample mode requires an rng")
        if temperature <= 0:
            raise ValueError("temperature must be positive")
        idx = np.flatnonzero(elig)
        z = scores[idx] / temperature
        z -= z.max()
        probs = np.exp(z)
        probs /= probs.sum()
        u = rng.uniform() if hasattr(rng, "uniform") else rng.random()
        return int(idx[np.searchsorted(np.cumsum(probs), u, side="right").clip(0, len(idx) - 1)])
    raise ValueError(f"unknown mode {mode!r}")
