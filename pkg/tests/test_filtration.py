from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dynarisk.errors import (
    AnchorMismatch,
    EnumerationCapExceeded,
    InvalidStoppingTime,
    NonTreeShape,
    ProbNotNormalized,
    ZeroProbabilityNode,
)
from dynarisk.filtration import (
    ConditionalValue,
    StoppingTime,
    build_tree,
    conditional_expectation,
    count_stopping_times,
    enumerate_stopping_times,
    is_valid_stopping_set,
    tree_to_spec,
)
from dynarisk.generators import random_tree

F = Fraction


def two_leaf(p="1/2", q="1/2"):
    return build_tree(
        {
            "horizon": 1,
            "nodes": [{"id": "r", "time": 0, "parent": None}, {"id": "a", "time": 1, "parent": "r"}, {"id": "b", "time": 1, "parent": "r"}],
            "leaf_probs": {"a": p, "b": q},
        }
    )


def test_trivial_tree():
    t = build_tree({"horizon": 0, "nodes": [{"id": "r", "time": 0, "parent": None}], "leaf_probs": {"r": "1"}})
    assert len(t) == 1 and t.leaves == (0,)
    assert len(enumerate_stopping_times(t)) == 1


def test_paper53_shape(tree):
    assert len(tree) == 7
    assert tree.horizon == 2
    assert [tree.ids[n] for n in tree.nodes_at(1)] == ["w12", "w34"]
    assert all(tree.prob[l] == F(1, 4) for l in tree.leaves)
    assert tree.prob[tree.node("w12")] == F(1, 2)


def test_unnormalized_probabilities():
    with pytest.raises(ProbNotNormalized):
        two_leaf("1/2", "1/3")


def test_zero_probability():
    with pytest.raises(ZeroProbabilityNode):
        two_leaf("0", "1")


@pytest.mark.parametrize(
    "nodes",
    [
        [{"id": "r", "time": 0, "parent": None}, {"id": "s", "time": 0, "parent": None}],
        [{"id": "r", "time": 0, "parent": None}, {"id": "a", "time": 2, "parent": "r"}],
        [{"id": "r", "time": 0, "parent": None}, {"id": "a", "time": 1, "parent": "zz"}],
    ],
)
def test_bad_shapes(nodes):
    with pytest.raises(NonTreeShape):
        build_tree({"horizon": 1, "nodes": nodes, "leaf_probs": {"a": "1"}})


def test_leaf_before_horizon():
    spec = {
        "horizon": 2,
        "nodes": [
            {"id": "r", "time": 0, "parent": None},
            {"id": "a", "time": 1, "parent": "r"},
            {"id": "b", "time": 1, "parent": "r"},
            {"id": "c", "time": 2, "parent": "a"},
        ],
        "leaf_probs": {"c": "1/2", "b": "1/2"},
    }
    with pytest.raises(NonTreeShape):
        build_tree(spec)


def test_spec_roundtrip(tree):
    again = build_tree(tree_to_spec(tree))
    assert again.ids == tree.ids and again.prob == tree.prob


def test_conditional_expectation_examples(tree):
    f = dict(zip(tree.leaves, map(F, (5, 1, 2, -1))))
    assert conditional_expectation(tree, f, 1).by_id() == {"w12": F(3), "w34": F(1, 2)}
    assert conditional_expectation(tree, f, 0).by_id() == {"O": F(7, 4)}
    c = conditional_expectation(tree, {l: F(3) for l in tree.leaves}, 1)
    assert set(c.values.values()) == {F(3)}


def test_conditional_expectation_missing_leaf(tree):
    with pytest.raises(AnchorMismatch):
        conditional_expectation(tree, {tree.leaves[0]: F(1)}, 0)


def test_enumeration_counts(tree):
    all0 = enumerate_stopping_times(tree, 0)
    assert len(all0) == 5
    assert len(enumerate_stopping_times(tree, 1)) == 4
    assert len(enumerate_stopping_times(tree, 2)) == 1
    ids = {frozenset(tree.ids[s] for s in th.stops) for th in all0}
    assert ids == {
        frozenset({"O"}),
        frozenset({"w12", "w34"}),
        frozenset({"w1", "w2", "w3", "w4"}),
        frozenset({"w12", "w3", "w4"}),
        frozenset({"w1", "w2", "w34"}),
    }


def test_enumeration_cap(tree):
    with pytest.raises(EnumerationCapExceeded):
        enumerate_stopping_times(tree, 0, cap=4)


def test_invalid_stopping_sets(tree):
    with pytest.raises(InvalidStoppingTime):
        StoppingTime(tree, ["w12"])
    with pytest.raises(InvalidStoppingTime):
        StoppingTime(tree, ["O", "w12", "w34"])
    assert not is_valid_stopping_set(tree, [tree.node("w12")])


def test_conditional_value_anchor_mismatch(tree):
    a = ConditionalValue.constant(StoppingTime.constant(tree, 0), F(1))
    b = ConditionalValue.constant(StoppingTime.constant(tree, 1), F(1))
    with pytest.raises(AnchorMismatch):
        a + b


def _brute_count(tree, floor):
    # every subset of eligible nodes, filtered by the path rule
    nodes = [m for m in range(len(tree)) if tree.times[m] >= floor]
    count = 0
    for mask in range(1 << len(nodes)):
        chosen = [nodes[i] for i in range(len(nodes)) if mask >> i & 1]
        if is_valid_stopping_set(tree, chosen):
            count += 1
    return count


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), floor=st.integers(0, 2))
def test_enumeration_matches_subset_brute_force(seed, floor):
    tree = random_tree(random.Random(seed), max_horizon=3, max_branching=2)
    floor = min(floor, tree.horizon)
    found = enumerate_stopping_times(tree, floor)
    assert len(found) == _brute_count(tree, floor) == count_stopping_times(tree, floor)
    assert len(set(found)) == len(found)
    assert all(is_valid_stopping_set(tree, th.stops) for th in found)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_tower_property_and_probabilities(seed):
    rng = random.Random(seed)
    tree = random_tree(rng, max_horizon=3)
    f = {l: F(rng.randint(-8, 8), rng.choice((1, 2, 4))) for l in tree.leaves}
    top = conditional_expectation(tree, f, 0)
    for t in range(tree.horizon + 1):
        mid = conditional_expectation(tree, f, t)
        assert conditional_expectation(tree, mid.to_leaves(), 0) == top
    for m in range(len(tree)):
        if tree.children[m]:
            assert sum(tree.prob[c] for c in tree.children[m]) == tree.prob[m]
