import numpy as np
import pytest

from sgexec import domains
from sgexec.generate import (
    GenerationError,
    GenParams,
    PRESETS,
    enumerate_mining_subgraphs,
    generate_playground_graph,
    mining_template,
    preset,
)
from sgexec.graphs import SubtaskGraph


class TestPresets:
    def test_d1_block(self):
        p = preset("D1")
        assert p.n_tasks_per_layer == (6, 4, 2, 1)
        assert p.n_distractors_per_layer == (2, 1, 0, 0)
        assert p.n_and_per_layer == ((3, 5), (3, 4), (2, 2))
        assert p.reward_per_layer[-1] == (1.8, 2.0)
        assert p.step_budget_range == (48, 72)

    def test_d4_block(self):
        p = preset("D4")
        assert p.n_tasks_per_layer == (4, 3, 3, 3, 2, 1)
        assert p.n_distractors_per_layer == (0, 0, 0, 0, 0, 0)
        assert p.step_budget_range == (56, 84)

    def test_base_or_restricts_disjunction(self):
        assert preset("Base-OR").n_or_children == ((1, 1), (1, 1), (1, 1))

    def test_base_delayed_rewards_only_at_top(self):
        p = preset("Base+Delayed")
        assert p.reward_per_layer[:-1] == ((0.0, 0.0), (0.0, 0.0), (0.0, 0.0))
        assert p.reward_per_layer[-1] == (1.6, 1.8)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="unknown preset"):
            preset("D9")

    def test_all_presets_generate(self):
        for name in PRESETS:
            g = generate_playground_graph(preset(name), np.random.default_rng(0))
            assert isinstance(g, SubtaskGraph)


class TestPlaygroundGenerator:
    def test_d1_shape(self):
        g = generate_playground_graph(preset("D1"), np.random.default_rng(0))
        assert g.n_subtasks == 13
        assert max(g.layers) == 3
        layer_counts = [g.layers.count(l) for l in range(4)]
        assert layer_counts == [6, 4, 2, 1]

    def test_determinism_byte_identical(self):
        p = preset("D2")
        a = generate_playground_graph(p, np.random.default_rng(123)).dumps()
        b = generate_playground_graph(p, np.random.default_rng(123)).dumps()
        assert a == b

    def test_seed_field_used_when_no_rng(self):
        from dataclasses import replace

        p = replace(preset("D1"), seed=99)
        assert generate_playground_graph(p).dumps() == generate_playground_graph(p).dumps()

    def test_500_draws_structurally_distinct(self):
        p = preset("D1")
        hashes = {
            generate_playground_graph(p, np.random.default_rng(s)).canonical_structure_hash()
            for s in range(500)
        }
        assert len(hashes) >= 500

    def test_no_negatives_no_distractors_case(self):
        p = GenParams(
            n_tasks_per_layer=(3, 2, 1),
            n_distractors_per_layer=(0, 0, 0),
            n_and_per_layer=((2, 3), (1, 2)),
            n_and_children_pos=((1, 2), (1, 2)),
            n_and_children_neg=((0, 0), (0, 0)),
            n_distractor_neg_parents=((0, 0), (0, 0), (0, 0)),
            n_or_children=((1, 2), (1, 1)),
            reward_per_layer=((0.1, 0.2), (0.3, 0.4), (1.0, 1.2)),
            step_budget_range=(10, 20),
        )
        g = generate_playground_graph(p, np.random.default_rng(5))
        assert not g.distractors()
        for node in g.and_nodes:
            assert all(not neg for _c, neg in node.children)

    def test_count_audit_within_sampled_ranges(self):
        p = preset("D1")
        for seed in range(30):
            g = generate_playground_graph(p, np.random.default_rng(seed))
            distractors = g.distractors()
            layers = g.layers
            # per-layer totals and distractor counts are exact
            for l, (nt, nd) in enumerate(
                zip(p.n_tasks_per_layer, p.n_distractors_per_layer)
            ):
                members = [i for i in range(g.n_subtasks) if layers[i] == l]
                assert len(members) == nt
                assert sum(1 for i in members if i in distractors) == nd
            # distractors carry only negated parent edges
            for d in distractors:
                assert g.or_children[d] == ()
                for parent, _aid, neg in g.parent_edges(d):
                    assert neg
            # AND pools per boundary inside the preset range
            for b in range(len(p.n_and_per_layer)):
                lo, hi = p.n_and_per_layer[b]
                pool = [
                    a for a in g.and_nodes
                    if any(layers[c] == b for c, _n in a.children)
                ]
                assert lo <= len(pool) <= hi
            # per-node positive/negated child counts inside ranges
            for a in g.and_nodes:
                src_layer = max(layers[c] for c, _n in a.children)
                pos = sum(
                    1 for c, n in a.children if not n
                )
                neg_regular = sum(
                    1 for c, n in a.children if n and c not in distractors
                )
                plo, phi = p.n_and_children_pos[src_layer]
                nlo, nhi = p.n_and_children_neg[src_layer]
                assert plo <= pos <= phi
                assert nlo <= neg_regular <= nhi
            # rewards inside per-layer ranges
            for s in g.subtasks:
                lo, hi = p.reward_per_layer[s.layer]
                assert lo <= s.reward <= hi
            # budget range copied
            assert g.step_budget_range == p.step_budget_range

    def test_unsatisfiable_params_named_error(self):
        p = GenParams(
            n_tasks_per_layer=(1, 1),
            n_distractors_per_layer=(0, 0),
            n_and_per_layer=((2, 2),),
            n_and_children_pos=((2, 2),),  # needs 2 regulars below, only 1 exists
            n_and_children_neg=((0, 0),),
            n_distractor_neg_parents=((0, 0), (0, 0)),
            n_or_children=((1, 1),),
            reward_per_layer=((0.1, 0.2), (0.3, 0.4)),
            step_budget_range=(5, 8),
        )
        with pytest.raises(GenerationError, match="N_ac"):
            generate_playground_graph(p, np.random.default_rng(0))

    def test_option_labels_unique_and_valid(self):
        for name in ("D1", "D2", "D3", "D4"):
            g = generate_playground_graph(preset(name), np.random.default_rng(4))
            labels = [s.label for s in g.subtasks]
            assert len(set(labels)) == len(labels)
            for lb in labels:
                domains.parse_option("playground", lb)


class TestMining:
    def test_template_has_26_subtasks(self):
        t = mining_template()
        assert t.n_subtasks == 26
        assert [s.label for s in t.subtasks] == [chr(65 + i) for i in range(26)]

    def test_template_recipes_match_catalog(self):
        t = mining_template()
        # light furnace <- firewood OR coal
        j = next(s.id for s in t.subtasks if s.label == "J")
        disjuncts = [
            {t.subtasks[c].label for c, _n in t.and_node(a).children}
            for a in t.or_children[j]
        ]
        assert {"D"} in disjuncts and {"G"} in disjuncts
        # tool gating: iron needs the stone pickaxe
        i = next(s.id for s in t.subtasks if s.label == "I")
        assert [
            {t.subtasks[c].label for c, _n in t.and_node(a).children}
            for a in t.or_children[i]
        ] == [{"H"}]

    def test_corpus_of_640_with_keep_set(self):
        t = mining_template()
        subs = enumerate_mining_subgraphs(t, np.random.default_rng(3), count=640)
        assert len(subs) == 640
        seen = set()
        for g in subs:
            letters = frozenset(s.label for s in g.subtasks)
            assert domains.MINING_KEEP <= letters
            seen.add(letters)
        assert len(seen) == 640

    def test_reward_scaling_bounds(self):
        t = mining_template()
        base = {s.label: s.reward for s in t.subtasks}
        for g in enumerate_mining_subgraphs(t, np.random.default_rng(9), count=32):
            for s in g.subtasks:
                if base[s.label] == 0.0:
                    assert s.reward == 0.0
                    continue
                ratio = s.reward / base[s.label]
                assert 0.8 <= ratio <= 1.2

    def test_subgraphs_are_valid_and_deterministic(self):
        t = mining_template()
        a = [g.dumps() for g in enumerate_mining_subgraphs(t, np.random.default_rng(5), count=16)]
        b = [g.dumps() for g in enumerate_mining_subgraphs(t, np.random.default_rng(5), count=16)]
        assert a == b

    def test_requesting_too_many_subgraphs_fails(self):
        t = mining_template()
        with pytest.raises(GenerationError, match="admits only"):
            enumerate_mining_subgraphs(t, np.random.default_rng(0), count=10_000_000)
