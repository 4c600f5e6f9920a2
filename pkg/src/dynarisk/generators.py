"""Seeded random trees, processes, densities and test batteries."""
from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from .filtration import FiltrationTree, StoppingTime, build_tree
from .processes import AdaptedProcess, DensityProcess

NUMERATORS = range(-8, 9)
DENOMINATORS = (1, 2, 4)


def random_tree(
    rng: random.Random,
    horizon: int | None = None,
    max_horizon: int = 4,
    max_branching: int = 3,
    min_branching: int = 1,
    name: str | None = None,
) -> FiltrationTree:
    """A random tree; conditional transition probabilities are small random rationals."""
    T = rng.randint(1, max_horizon) if horizon is None else horizon
    nodes = [{"id": "n0", "time": 0, "parent": None}]
    cond = {"n0": Fraction(1)}
    frontier = ["n0"]
    for t in range(1, T + 1):
        nxt = []
        for parent in frontier:
            k = rng.randint(min_branching, max_branching)
            weights = [rng.randint(1, 4) for _ in range(k)]
            total = sum(weights)
            for w in weights:
                nid = f"n{len(nodes)}"
                nodes.append({"id": nid, "time": t, "parent": parent})
                cond[nid] = cond[parent] * Fraction(w, total)
                nxt.append(nid)
        frontier = nxt
    spec = {"horizon": T, "nodes": nodes, "leaf_probs": {n: str(cond[n]) for n in frontier}}
    if name:
        spec["name"] = name
    return build_tree(spec)


def random_value(rng: random.Random) -> Fraction:
    return Fraction(rng.choice(NUMERATORS), rng.choice(DENOMINATORS))


def random_process(rng: random.Random, tree: FiltrationTree, tau=None, theta=None) -> AdaptedProcess:
    return AdaptedProcess(tree, [random_value(rng) for _ in range(len(tree))], tau, theta)


def random_leaf_density(rng: random.Random, tree: FiltrationTree, positive: bool = True) -> dict[int, Fraction]:
    lo = 1 if positive else 0
    while True:
        w = {l: Fraction(rng.randint(lo, 4)) for l in tree.leaves}
        total = sum(tree.prob[l] * w[l] for l in tree.leaves)
        if total > 0:
            return {l: v / total for l, v in w.items()}


def random_density(rng: random.Random, tree: FiltrationTree, positive_leaves: bool = False, sparse: float = 0.5) -> DensityProcess:
    """A random element of D_{0,T}; with ``positive_leaves`` it lies in D^e."""
    while True:
        inc = []
        for m in range(len(tree)):
            if tree.is_leaf(m) and positive_leaves:
                inc.append(Fraction(rng.randint(1, 4)))
            elif rng.random() < sparse:
                inc.append(Fraction(0))
            else:
                inc.append(Fraction(rng.randint(0, 4)))
        total = sum(tree.prob[m] * inc[m] for m in range(len(tree)))
        if total > 0:
            return DensityProcess(tree, [v / total for v in inc])


def random_stopping_time(rng: random.Random, tree: FiltrationTree, floor: int = 0) -> StoppingTime:
    stops = []
    stack = [tree.root]
    while stack:
        m = stack.pop()
        if tree.is_leaf(m) or (tree.times[m] >= floor and rng.random() < 0.4):
            stops.append(m)
        else:
            stack.extend(tree.children[m])
    return StoppingTime(tree, stops)


def random_weights(rng: random.Random, horizon: int) -> list[Fraction]:
    w = [Fraction(rng.randint(0, 4)) for _ in range(horizon)] + [Fraction(rng.randint(1, 4))]
    total = sum(w)
    return [v / total for v in w]


def structured_processes(tree: FiltrationTree) -> list[AdaptedProcess]:
    """Constants, ramps and subtree indicators."""
    out = [
        AdaptedProcess.zero(tree),
        AdaptedProcess.constant(tree, 1),
        AdaptedProcess.constant(tree, -1),
        AdaptedProcess.from_function(tree, lambda m: Fraction(tree.times[m])),
        AdaptedProcess.from_function(tree, lambda m: Fraction(-tree.times[m])),
    ]
    for n in range(1, len(tree)):
        below = set(tree.subtree(n))
        out.append(AdaptedProcess.from_function(tree, lambda m, b=below: Fraction(1 if m in b else 0)))
        out.append(AdaptedProcess.from_function(tree, lambda m, b=below: Fraction(-1 if m in b else 0)))
    return out


def battery(tree: FiltrationTree, n: int = 100, seed: int = 0, extra: Sequence[AdaptedProcess] = (), structured: bool = True) -> list[AdaptedProcess]:
    """``n`` seeded random rational processes, then structured ones, then ``extra``."""
    rng = random.Random(seed)
    out = [random_process(rng, tree) for _ in range(n)]
    if structured:
        out.extend(structured_processes(tree))
    out.extend(extra)
    return out
