"""Object catalogs and subtask-option bindings for the two gridworld domains.

A subtask is an option (interaction primitive, target object type): the agent
walks onto the nearest instance of the target type and performs the
interaction. Playground binds options through subtask labels of the form
"pickup:Cow"; Mining binds single-letter labels through the recipe table
below.
"""

from __future__ import annotations

from dataclasses import dataclass

# -- Playground -------------------------------------------------------------

PLAYGROUND_TYPES = (
    "Cow", "Milk", "Duck", "Egg", "Diamond", "Heart", "Box", "Meat", "Block", "Ice",
)
PLAYGROUND_IMPASSABLE = frozenset({"Block"})
# (type, move probability) for stochastically moving objects
PLAYGROUND_MOVERS = {"Cow": 0.1, "Duck": 0.2}
PLAYGROUND_INTERACTIONS = ("pickup", "transform")
# Block is impassable and Ice is the transform product, so neither is a
# sampling target; 2 interactions x 8 types = 16 distinct options.
PLAYGROUND_TARGETS = ("Cow", "Milk", "Duck", "Egg", "Diamond", "Heart", "Box", "Meat")
PLAYGROUND_OPTIONS = tuple(
    (inter, obj) for obj in PLAYGROUND_TARGETS for inter in PLAYGROUND_INTERACTIONS
)

# -- Mining -----------------------------------------------------------------

MINING_TYPES = (
    "Mountain", "Water", "Workspace", "Furnace", "Tree", "Stone", "Grass", "Pig",
    "Coal", "Iron", "Silver", "Gold", "Diamond", "JewelerShop", "LumberShop",
)
MINING_IMPASSABLE = frozenset({"Mountain", "Water"})
MINING_STATIONS = ("Workspace", "Furnace", "LumberShop", "JewelerShop")
MINING_INTERACTIONS = ("pickup", "use1", "use2", "use3", "use4", "use5")


@dataclass(frozen=True)
class MiningSubtask:
    letter: str
    name: str
    interaction: str
    target: str
    reward: float
    recipe: tuple[tuple[str, ...], ...]  # disjuncts of required letters


# Crafting-chain recipes: an item is an ingredient of later items, and some
# tools gate pickups (stone pickaxe for iron; iron pickaxe for the rarer
# ores). The furnace lights with firewood OR coal. Gather subtasks pay small
# immediate rewards, the tool chain pays nothing (the stick slightly less
# than nothing), and crafted products at the top pay the most: a greedy
# agent chases gathers while the tool gates are what unlock the value.
MINING_SUBTASKS = (
    MiningSubtask("A", "get wood", "pickup", "Tree", 0.15, ()),
    MiningSubtask("B", "get stone", "pickup", "Stone", 0.15, ()),
    MiningSubtask("C", "get string", "pickup", "Grass", 0.15, ()),
    MiningSubtask("D", "make firewood", "use1", "LumberShop", 0.3, (("A",),)),
    MiningSubtask("E", "get pork", "pickup", "Pig", 0.3, ()),
    MiningSubtask("F", "make stick", "use2", "LumberShop", -0.15, (("A",),)),
    MiningSubtask("G", "get coal", "pickup", "Coal", 0.3, ()),
    MiningSubtask("H", "make stone pickaxe", "use1", "Workspace", 0.0, (("F", "B"),)),
    MiningSubtask("I", "get iron", "pickup", "Iron", 0.7, (("H",),)),
    MiningSubtask("J", "light furnace", "use1", "Furnace", 0.0, (("D",), ("G",))),
    MiningSubtask("K", "smelt iron", "use2", "Furnace", 1.4, (("I", "J"),)),
    MiningSubtask("L", "make iron pickaxe", "use2", "Workspace", 0.0, (("F", "K"),)),
    MiningSubtask("M", "get silver", "pickup", "Silver", 0.7, (("L",),)),
    MiningSubtask("N", "get gold", "pickup", "Gold", 0.85, (("L",),)),
    MiningSubtask("O", "get diamond", "pickup", "Diamond", 1.0, (("L",),)),
    MiningSubtask("P", "smelt silver", "use3", "Furnace", 1.1, (("M", "J"),)),
    MiningSubtask("Q", "smelt gold", "use4", "Furnace", 1.25, (("N", "J"),)),
    MiningSubtask("R", "make arrow", "use3", "LumberShop", 0.4, (("F", "B"),)),
    MiningSubtask("S", "make bow", "use4", "LumberShop", 0.4, (("F", "C"),)),
    MiningSubtask("T", "make silverware", "use3", "Workspace", 1.7, (("P",),)),
    MiningSubtask("U", "make goldware", "use4", "Workspace", 1.8, (("Q",),)),
    MiningSubtask("V", "make bracelet", "use5", "Workspace", 2.1, (("P", "O"),)),
    MiningSubtask("W", "make earrings", "use1", "JewelerShop", 2.2, (("Q", "O"),)),
    MiningSubtask("X", "make ring", "use2", "JewelerShop", 2.2, (("P", "Q"),)),
    MiningSubtask("Y", "make necklace", "use3", "JewelerShop", 2.8, (("P", "Q", "O"),)),
    MiningSubtask("Z", "cook pork", "use5", "Furnace", 0.55, (("E", "J"),)),
)

MINING_BY_LETTER = {m.letter: m for m in MINING_SUBTASKS}

# Subgraph enumeration never removes these (the tool-chain backbone).
MINING_KEEP = frozenset("ABDEFGHIKL")

# Budgets are proportional to subgraph size; calibrated so the reward
# propagation policy completes roughly 60-80% of subtasks per episode.
MINING_STEP_BUDGET = (122, 164)


def parse_option(domain: str, label: str) -> tuple[str, str]:
    """Resolve a subtask label to its (interaction, target_type) option."""
    if domain == "playground":
        inter, _, obj = label.partition(":")
        if inter not in PLAYGROUND_INTERACTIONS or obj not in PLAYGROUND_TYPES:
            raise ValueError(f"not a playground option label: {label!r}")
        return inter, obj
    if domain == "mining":
        m = MINING_BY_LETTER.get(label)
        if m is None:
            raise ValueError(f"not a mining subtask letter: {label!r}")
        return m.interaction, m.target
    raise ValueError(f"unknown domain {domain!r}")


def infer_domain(labels) -> str:
    """Heuristic label-based domain detection for graph files."""
    labels = list(labels)
    if labels and all(lb in MINING_BY_LETTER for lb in labels):
        return "mining"
    return "playground"
