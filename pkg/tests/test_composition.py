from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import linprog

from dynarisk.composition import (
    Mode,
    ScenarioSet,
    build_density,
    check_m_stability,
    check_stability,
    concat,
    concat_closure,
    m_stable_closure,
    normalize_from,
    paste_density,
)
from dynarisk.errors import BadWeights, NotADensity, NotAntichainSubset, SubsetEnumerationCapExceeded
from dynarisk.filtration import StoppingTime, build_tree
from dynarisk.generators import random_density, random_leaf_density, random_stopping_time, random_tree, random_weights
from dynarisk.processes import Classification, DensityProcess, classify_density, mixture

from conftest import leaf

F = Fraction


def test_concat_empty_set_and_idempotence(tree):
    rng = random.Random(3)
    a, b = random_density(rng, tree), random_density(rng, tree)
    theta = StoppingTime.constant(tree, 1)
    assert concat(a, b, theta, []) == a
    assert concat(a, a, theta, theta.stops) == a


def test_concat_example(tree):
    a = DensityProcess(tree, {"w12": 1, "w34": 1})
    b = DensityProcess(tree, {"w1": 1, "w2": 1, "w3": 1, "w4": 1})
    c = concat(a, b, 1, [tree.node("w12")])
    assert c.by_id() == {"w34": 1, "w1": 1, "w2": 1}
    # conditional mass 1/2 on each of w1, w2 under the top atom
    top = tree.node("w12")
    assert [tree.cond_prob(l, top) * c.increments[l] for l in tree.leaves_under(top)] == [F(1, 2), F(1, 2)]


def test_concat_requires_stop_nodes(tree):
    a = DensityProcess(tree, {"w12": 1, "w34": 1})
    with pytest.raises(NotAntichainSubset):
        concat(a, a, 1, [tree.node("w1")])


def test_paste_examples(tree, ones):
    g = leaf(tree, 2, 0, 2, 0)
    assert paste_density(tree, ones, ones, 1, [tree.node("w12")]) == ones
    assert paste_density(tree, ones, g, 1, []) == ones
    assert paste_density(tree, ones, g, 1, [tree.node("w12")]) == leaf(tree, 2, 0, 1, 1)


def test_paste_rejects_non_density(tree, ones):
    with pytest.raises(NotADensity):
        paste_density(tree, ones, leaf(tree, 1, 1, 1, 2), 1, [])
    with pytest.raises(NotADensity):
        paste_density(tree, ones, leaf(tree, 2, 2, 1, -1), 1, [])


def test_normalize_from_examples(tree):
    a = build_density(tree, Mode.FINAL, [1, 1, 1, 1])
    assert normalize_from(a, 2) == a
    b = DensityProcess(tree, {"w12": F(1, 2), "w34": F(1, 2), "w1": F(1, 2), "w2": F(1, 2)})
    c = normalize_from(b, 1)
    assert c.by_id() == {"w12": F(1, 2), "w1": F(1, 2), "w2": F(1, 2), "w34": 1}
    d = DensityProcess(tree, {"O": 1})
    assert normalize_from(d, 1).by_id() == {"w12": 1, "w34": 1}


def test_build_density_examples(tree, ones):
    assert build_density(tree, Mode.FINAL, ones).by_id() == {"w1": 1, "w2": 1, "w3": 1, "w4": 1}
    assert build_density(tree, Mode.STOPPED, ones, xi=1).by_id() == {"w12": 1, "w34": 1}
    w = build_density(tree, Mode.WEIGHTED, ones, weights=["1/2", "1/4", "1/4"])
    assert w.by_id() == {"O": F(1, 2), "w12": F(1, 4), "w34": F(1, 4), "w1": F(1, 4), "w2": F(1, 4), "w3": F(1, 4), "w4": F(1, 4)}


@pytest.mark.parametrize("weights", [["1/2", "1/2"], ["1", "1/2", "-1/2"], ["1/2", "1/2", "0"], ["1/2", "1/4", "1/8"]])
def test_bad_weights(tree, ones, weights):
    with pytest.raises(BadWeights):
        build_density(tree, Mode.WEIGHTED, ones, weights=weights)


def test_singleton_stable(tree):
    rep = check_stability([build_density(tree, Mode.FINAL, [1, 1, 1, 1])])
    assert rep.stable and rep.complete


def test_closure_is_stable(tree):
    gens = [leaf(tree, 2, 0, 1, 1), leaf(tree, 1, 1, 2, 0)]
    P = m_stable_closure(tree, gens)
    Q = [build_density(tree, Mode.FINAL, f) for f in P]
    assert check_m_stability(tree, P).stable
    assert check_stability(Q).stable


def test_non_stable_pair_refuted_with_lp_witness(tree):
    f = leaf(tree, 2, 0, 1, 1)
    g = leaf(tree, 1, 1, 2, 0)
    Q = [build_density(tree, Mode.FINAL, f), build_density(tree, Mode.FINAL, g)]
    rep = check_stability(Q, use_hull=True)
    assert not rep.stable and rep.violations
    w = rep.violations[0]
    c = concat(Q[w["first"]], Q[w["second"]], w["time"], [tree.node(n) for n in w["atoms"]])
    # independent float check: no convex weights reproduce c
    A_eq = [[float(q.increments[m]) for q in Q] for m in range(len(tree))] + [[1.0, 1.0]]
    b_eq = [float(v) for v in c.increments] + [1.0]
    assert linprog([0, 0], A_eq=A_eq, b_eq=b_eq, bounds=[(0, None)] * 2, method="highs").status == 2


def _wide_tree(k):
    nodes = [{"id": "r", "time": 0, "parent": None}] + [{"id": f"c{i}", "time": 1, "parent": "r"} for i in range(k)]
    return build_tree({"horizon": 1, "nodes": nodes, "leaf_probs": {f"c{i}": str(F(1, k)) for i in range(k)}})


def test_subset_cap():
    tree = _wide_tree(13)
    Q = [build_density(tree, Mode.FINAL, [1] * 13), build_density(tree, Mode.FINAL, [F(13, 6)] * 6 + [F(0)] * 7)]
    with pytest.raises(SubsetEnumerationCapExceeded):
        check_stability(Q, sample=False)
    rep = check_stability(Q, cap=64)
    assert not rep.complete


def test_scenario_set_flags(tree):
    full = build_density(tree, Mode.FINAL, [1, 1, 1, 1])
    partial = DensityProcess(tree, {"w12": 1, "w3": 1, "w4": 1})
    assert ScenarioSet([full]).all_in_de
    s = ScenarioSet([full, partial])
    assert s.all_in_d and not s.all_in_de
    with pytest.raises(NotADensity):
        ScenarioSet([DensityProcess(tree, {"w1": 1})])


def test_concat_closure_stable(tree):
    rng = random.Random(5)
    gens = [random_density(rng, tree, positive_leaves=True) for _ in range(2)]
    Q = concat_closure(gens)
    assert check_stability(Q).stable


def _random_case(seed):
    rng = random.Random(seed)
    tree = random_tree(rng, max_horizon=3)
    theta = random_stopping_time(rng, tree)
    stops = sorted(theta.stops)
    A = [s for s in stops if rng.random() < 0.5]
    return rng, tree, theta, A


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_concat_stays_in_d_and_de(seed):
    rng, tree, theta, A = _random_case(seed)
    a, b = random_density(rng, tree), random_density(rng, tree)
    assert classify_density(concat(a, b, theta, A)) is not Classification.NOT_IN_D
    a, b = random_density(rng, tree, True), random_density(rng, tree, True)
    assert classify_density(concat(a, b, theta, A)) is Classification.IN_D_E


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_concat_affine_in_first_argument(seed):
    rng, tree, theta, A = _random_case(seed)
    a1, a2, b = (random_density(rng, tree) for _ in range(3))
    lam = F(rng.randint(0, 4), 4)
    lhs = concat(mixture([lam, 1 - lam], [a1, a2]), b, theta, A)
    rhs = mixture([lam, 1 - lam], [concat(a1, b, theta, A), concat(a2, b, theta, A)])
    assert lhs == rhs


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_paste_is_density(seed):
    rng, tree, theta, A = _random_case(seed)
    f, g = random_leaf_density(rng, tree, False), random_leaf_density(rng, tree, False)
    h = paste_density(tree, f, g, theta, A)
    assert sum(tree.prob[l] * h[l] for l in tree.leaves) == 1
    assert all(v >= 0 for v in h.values())


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_normalize_from_lands_in_window(seed):
    rng, tree, theta, _ = _random_case(seed)
    a = random_density(rng, tree)
    assert classify_density(normalize_from(a, theta), theta, None) is not Classification.NOT_IN_D
