import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sgexec.generate import GenerationError, GenParams, generate_playground_graph, preset
from sgexec.graphs import AndNode, SubtaskGraph, SubtaskSpec


def small_params(rng: np.random.Generator) -> GenParams:
    """Random 2-3 layer parameters yielding graphs with at most 10 subtasks."""
    layers = int(rng.integers(2, 4))
    nt, nd = [], []
    for l in range(layers):
        t = int(rng.integers(2, 5)) if l == 0 else int(rng.integers(1, 4))
        t = min(t, 10 - sum(nt) - (layers - 1 - l))
        t = max(t, 1)
        nt.append(t)
        nd.append(int(rng.integers(0, min(2, t - 1) + 1)))
    regular = [nt[l] - nd[l] for l in range(layers)]
    na, pos, neg, oc = [], [], [], []
    for l in range(layers - 1):
        r = regular[l]
        cap = r + (r * (r - 1)) // 2  # distinct 1- or 2-positive-child sets
        na.append((1, max(1, min(3, cap))))
        pos.append((1, min(2, r)))
        neg.append((0, min(1, max(0, r - 2))))
        oc.append((1, 2))
    return GenParams(
        n_tasks_per_layer=tuple(nt),
        n_distractors_per_layer=tuple(nd),
        n_and_per_layer=tuple(na),
        n_and_children_pos=tuple(pos),
        n_and_children_neg=tuple(neg),
        n_distractor_neg_parents=tuple(
            (0, 1 if l < layers - 1 else 0) for l in range(layers)
        ),
        n_or_children=tuple(oc),
        reward_per_layer=tuple((0.1 * (l + 1), 0.2 * (l + 1)) for l in range(layers)),
        step_budget_range=(8, 14),
    )


def small_graph(seed: int) -> SubtaskGraph:
    rng = np.random.default_rng(seed)
    for _ in range(10):
        try:
            return generate_playground_graph(small_params(rng), rng)
        except GenerationError:
            continue
    raise RuntimeError(f"could not generate a small graph for seed {seed}")


def fig7_style_graph() -> SubtaskGraph:
    """Constructed distractor/delayed-reward instance.

    Zero-reward leaves A, B, C feed positively-rewarded mid subtasks F, G
    and a high-reward top subtask K; distractors D, E, H pay small immediate
    rewards but negate the path to K.
    """
    labels = [
        "pickup:Cow", "pickup:Milk", "pickup:Duck",        # A B C (r = 0)
        "pickup:Egg", "pickup:Diamond", "pickup:Heart",    # D E H (distractors)
        "transform:Cow", "transform:Milk",                 # F G
        "transform:Duck",                                  # K
    ]
    subtasks = (
        SubtaskSpec(0, labels[0], 0, 0.0),
        SubtaskSpec(1, labels[1], 0, 0.0),
        SubtaskSpec(2, labels[2], 0, 0.0),
        SubtaskSpec(3, labels[3], 0, 0.1),
        SubtaskSpec(4, labels[4], 0, 0.1),
        SubtaskSpec(5, labels[5], 0, 0.1),
        SubtaskSpec(6, labels[6], 1, 0.7),
        SubtaskSpec(7, labels[7], 1, 0.7),
        SubtaskSpec(8, labels[8], 2, 2.0),
    )
    and_nodes = (
        AndNode(0, ((0, False), (1, False), (3, True), (4, True))),   # F <- A & B & !D & !E
        AndNode(1, ((1, False), (2, False), (4, True), (5, True))),   # G <- B & C & !E & !H
        AndNode(2, ((6, False), (7, False), (3, True), (5, True))),   # K <- F & G & !D & !H
    )
    or_children = ((), (), (), (), (), (), (0,), (1,), (2,))
    return SubtaskGraph(9, subtasks, and_nodes, or_children, (30, 40))


@pytest.fixture(scope="session")
def d1_graph() -> SubtaskGraph:
    return generate_playground_graph(preset("D1"), np.random.default_rng(7))


@pytest.fixture(scope="session")
def fig7_graph() -> SubtaskGraph:
    return fig7_style_graph()
