from __future__ import annotations

import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from dynarisk.errors import NotADensity, TreeMismatch, WindowOrderViolation
from dynarisk.filtration import StoppingTime
from dynarisk.generators import random_density, random_process, random_stopping_time, random_tree
from dynarisk.processes import (
    AdaptedProcess,
    Classification,
    DensityProcess,
    classify_density,
    pairing,
    project,
    sup_norm,
)

F = Fraction


def point_mass_at_leaves(tree):
    return DensityProcess(tree, {tree.ids[l]: 1 for l in tree.leaves})


def test_project_full_window_is_identity(X):
    assert project(X, 0, 2) == X


def test_project_drops_root(X, tree):
    Y = project(X, 1, 2)
    assert Y["O"] == 0
    assert all(Y.values[m] == X.values[m] for m in range(1, len(tree)))


def test_project_freezes_after_theta(X):
    Y = project(X, 0, 1)
    assert Y["w1"] == Y["w2"] == 4 and Y["w3"] == Y["w4"] == 1


def test_project_constant(tree):
    tau = StoppingTime(tree, ["w12", "w3", "w4"])
    Y = project(AdaptedProcess.constant(tree, 5), tau)
    assert Y["O"] == 0 and Y["w34"] == 0 and Y["w12"] == 5 and Y["w1"] == 5 and Y["w3"] == 5


def test_window_order(X):
    with pytest.raises(WindowOrderViolation):
        project(X, 2, 1)


def test_pairing_examples(tree, X):
    a = point_mass_at_leaves(tree)
    assert pairing(X, a, 0, 2).by_id() == {"O": F(7, 4)}
    assert pairing(X, a, 1, 2).by_id() == {"w12": F(3), "w34": F(1, 2)}
    one = AdaptedProcess.constant(tree, 1)
    assert set(pairing(one, a, 1, 2).values.values()) == {F(1)}


def test_pairing_tree_mismatch(tree, X):
    other = random_tree(random.Random(1), horizon=2)
    with pytest.raises(TreeMismatch):
        pairing(X, point_mass_at_leaves(other))


def test_sup_norm_examples(tree, X):
    assert sup_norm(X, 0, 2).by_id() == {"O": F(5)}
    assert sup_norm(X, 1, 2).by_id() == {"w12": F(5), "w34": F(2)}
    assert set(sup_norm(AdaptedProcess.constant(tree, -3)).values.values()) == {F(3)}


def test_classification_examples(tree):
    assert classify_density(point_mass_at_leaves(tree), 0, 2) is Classification.IN_D_E
    assert classify_density(DensityProcess(tree, {"w1": 2}), 0, 2) is Classification.NOT_IN_D
    a = DensityProcess(tree, {"w12": 1, "w3": 1, "w4": 1})
    assert classify_density(a, 0, 2) is Classification.IN_D


def test_classification_outside_window(tree):
    # mass at the root lies outside [1, 2]
    a = DensityProcess(tree, {"O": 1})
    assert classify_density(a, 1, 2) is Classification.NOT_IN_D


def test_negative_increment(tree):
    with pytest.raises(NotADensity):
        DensityProcess(tree, {"w1": -1})


def _setup(seed):
    rng = random.Random(seed)
    tree = random_tree(rng, max_horizon=3)
    tau = random_stopping_time(rng, tree)
    theta = random_stopping_time(rng, tree)
    while not tau <= theta:
        tau = random_stopping_time(rng, tree)
        theta = random_stopping_time(rng, tree)
    return rng, tree, tau, theta


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_bilinearity(seed):
    rng, tree, tau, theta = _setup(seed)
    X, Y = random_process(rng, tree), random_process(rng, tree)
    a = random_density(rng, tree)
    al, be = F(rng.randint(-3, 3), 2), F(rng.randint(-3, 3), 3)
    lhs = pairing(al * X + be * Y, a, tau, theta)
    rhs = pairing(X, a, tau, theta) * al + pairing(Y, a, tau, theta) * be
    assert lhs == rhs


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_projection_idempotent_and_pairing_invariant(seed):
    rng, tree, tau, theta = _setup(seed)
    X = random_process(rng, tree)
    P = project(X, tau, theta)
    assert project(P, tau, theta) == P
    a = random_density(rng, tree)
    assert pairing(P, a, tau, theta) == pairing(X, a, tau, theta)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000))
def test_pairing_bounded_by_norm(seed):
    rng, tree, tau, theta = _setup(seed)
    X = random_process(rng, tree)
    # scale a density so its conditional mass on the window is at most 1
    a = random_density(rng, tree)
    mass = a.mass(tau, theta)
    top = max(mass.values.values())
    if top > 1:
        a = a.scale(1 / top)
    p = pairing(X, a, tau, theta)
    n = sup_norm(X, tau, theta)
    assert all(abs(p.values[k]) <= n.values[k] for k in p.values)


def test_pairing_hand_sum(tree, X):
    # independent computation straight from the definition
    a = DensityProcess(tree, {"O": F(1, 2), "w12": F(1, 2), "w3": F(1), "w4": F(1)})
    expected = F(1, 2) * 2 + F(1, 2) * F(1, 2) * 4 + F(1, 4) * 2 + F(1, 4) * (-1)
    assert pairing(X, a, 0, 2).values[0] == expected
