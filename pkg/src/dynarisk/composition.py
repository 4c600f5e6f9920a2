"""Concatenation of density processes, pasting of terminal densities and stability checks."""
from __future__ import annotations

import enum
import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    BadWeights,
    NotADensity,
    NotAntichainSubset,
    SubsetEnumerationCapExceeded,
    TreeMismatch,
)
from .filtration import FiltrationTree, StoppingTime, as_stopping_time, to_number
from .optim import hull_membership
from .processes import Classification, DensityProcess, classify_density, leaf_function

ZERO = Fraction(0)
ONE = Fraction(1)
DEFAULT_SUBSET_CAP = 2**12


def node_expectations(tree: FiltrationTree, f: Mapping[int, Fraction]) -> list[Fraction]:
    """E[f | atom] for every node, computed bottom-up."""
    mass = [ZERO] * len(tree)
    for l in tree.leaves:
        mass[l] = tree.prob[l] * f[l]
    for m in reversed(range(len(tree))):
        if tree.children[m]:
            mass[m] = sum((mass[c] for c in tree.children[m]), ZERO)
    return [mass[m] / tree.prob[m] for m in range(len(tree))]


def check_leaf_density(tree: FiltrationTree, f) -> dict[int, Fraction]:
    f = leaf_function(tree, f)
    if any(v < 0 for v in f.values()):
        raise NotADensity("density has negative values")
    if sum((tree.prob[l] * f[l] for l in tree.leaves), ZERO) != 1:
        raise NotADensity("density does not integrate to 1")
    return f


def _stop_subset(theta: StoppingTime, A: Iterable) -> set[int]:
    nodes = {theta.tree.node(n) for n in A}
    if not nodes <= theta.stops:
        raise NotAntichainSubset("A must consist of stop nodes of theta")
    return nodes


def _tail_mass(a: DensityProcess, n: int) -> Fraction:
    tree = a.tree
    return sum((tree.prob[m] * a.increments[m] for m in tree.subtree(n)), ZERO) / tree.prob[n]


def concat(a: DensityProcess, b: DensityProcess, theta, A: Iterable) -> DensityProcess:
    """a (+)^theta_A b: keep a, except after theta on A where b's tail is rescaled to a's remaining mass."""
    if a.tree is not b.tree:
        raise TreeMismatch("densities live on different trees")
    tree = a.tree
    theta = as_stopping_time(tree, theta)
    inc = list(a.increments)
    for n in _stop_subset(theta, A):
        mb = _tail_mass(b, n)
        if mb == 0:
            continue
        ratio = _tail_mass(a, n) / mb
        for m in tree.subtree(n):
            inc[m] = ratio * b.increments[m]
    return DensityProcess(tree, inc)


def paste_density(tree: FiltrationTree, f, g, theta, A: Iterable) -> dict[int, Fraction]:
    """f (x)^theta_A g on leaf densities."""
    f = check_leaf_density(tree, f)
    g = check_leaf_density(tree, g)
    theta = as_stopping_time(tree, theta)
    out = dict(f)
    for n in _stop_subset(theta, A):
        leaves = tree.leaves_under(n)
        eg = sum((tree.prob[l] * g[l] for l in leaves), ZERO)
        if eg == 0:
            continue
        ef = sum((tree.prob[l] * f[l] for l in leaves), ZERO)
        for l in leaves:
            out[l] = ef / eg * g[l]
    return out


def normalize_from(a: DensityProcess, theta) -> DensityProcess:
    """The increments of ``a`` from theta on, rescaled to unit conditional mass.

    Atoms where ``a`` has no mass left get the unit point mass at theta.
    """
    tree = a.tree
    theta = as_stopping_time(tree, theta)
    inc = [ZERO] * len(tree)
    for n in theta.stops:
        mass = _tail_mass(a, n)
        if mass > 0:
            for m in tree.subtree(n):
                inc[m] = a.increments[m] / mass
        else:
            inc[n] = ONE
    return DensityProcess(tree, inc)


class Mode(enum.Enum):
    FINAL = "FINAL"
    STOPPED = "STOPPED"
    WEIGHTED = "WEIGHTED"


def check_weights(tree: FiltrationTree, weights: Sequence) -> list[Fraction]:
    mu = [to_number(w) for w in weights]
    if len(mu) != tree.horizon + 1:
        raise BadWeights(f"need {tree.horizon + 1} weights, got {len(mu)}")
    if any(w < 0 for w in mu):
        raise BadWeights("weights must be nonnegative")
    if sum(mu, ZERO) != 1:
        raise BadWeights("weights must sum to 1")
    if any(sum(mu[t:], ZERO) <= 0 for t in range(len(mu))):
        raise BadWeights("every tail sum of the weights must be positive")
    return mu


def build_density(tree: FiltrationTree, mode: Mode | str, f, xi=None, weights=None) -> DensityProcess:
    """Density processes induced by a terminal density: FINAL, STOPPED at xi, or WEIGHTED by mu."""
    mode = Mode(mode.upper()) if isinstance(mode, str) else mode
    f = check_leaf_density(tree, f)
    inc = [ZERO] * len(tree)
    if mode is Mode.FINAL:
        for l in tree.leaves:
            inc[l] = f[l]
    elif mode is Mode.STOPPED:
        if xi is None:
            raise ValueError("STOPPED mode needs a stopping time")
        xi = as_stopping_time(tree, xi)
        ef = node_expectations(tree, f)
        for s in xi.stops:
            inc[s] = ef[s]
    else:
        if weights is None:
            raise BadWeights("WEIGHTED mode needs weights")
        mu = check_weights(tree, weights)
        ef = node_expectations(tree, f)
        for m in range(len(tree)):
            inc[m] = mu[tree.times[m]] * ef[m]
    return DensityProcess(tree, inc)


@dataclass
class ScenarioSet:
    densities: tuple[DensityProcess, ...]
    tau: StoppingTime
    theta: StoppingTime
    all_in_d: bool = field(init=False)
    all_in_de: bool = field(init=False)

    def __init__(self, densities: Sequence[DensityProcess], tau=None, theta=None):
        if not densities:
            raise ValueError("a scenario set must be non-empty")
        tree = densities[0].tree
        if any(d.tree is not tree for d in densities):
            raise TreeMismatch("scenarios live on different trees")
        self.densities = tuple(densities)
        self.tau = as_stopping_time(tree, tau, 0)
        self.theta = as_stopping_time(tree, theta, tree.horizon)
        classes = [classify_density(d, self.tau, self.theta) for d in self.densities]
        bad = [i for i, c in enumerate(classes) if c is Classification.NOT_IN_D]
        if bad:
            raise NotADensity(f"scenarios {bad} are not in D for the window")
        self.all_in_d = True
        self.all_in_de = all(c is Classification.IN_D_E for c in classes)

    @property
    def tree(self) -> FiltrationTree:
        return self.densities[0].tree

    def __len__(self) -> int:
        return len(self.densities)

    def __iter__(self):
        return iter(self.densities)


@dataclass
class StabilityReport:
    stable: bool
    complete: bool
    checked: int
    violations: list[dict] = field(default_factory=list)
    method: str = "exact"

    @property
    def summary(self) -> str:
        scope = "complete" if self.complete else "certified up to cap"
        verdict = "stable" if self.stable else f"{len(self.violations)} violations"
        return f"{verdict} ({self.method}, {self.checked} checks, {scope})"


def _atom_subsets(atoms: Sequence[int], cap: int, rng: random.Random, sample: bool):
    """Non-trivial subsets of the atoms at one time; sampled when there are too many."""
    k = len(atoms)
    if 2**k <= cap:
        subsets = [c for r in range(1, k + 1) for c in itertools.combinations(atoms, r)]
        return subsets, True
    if not sample:
        raise SubsetEnumerationCapExceeded(f"2^{k} atom subsets exceed the cap {cap}")
    subsets = {(a,) for a in atoms}
    subsets.add(tuple(atoms))
    while len(subsets) < cap:
        pick = tuple(a for a in atoms if rng.random() < 0.5)
        if pick:
            subsets.add(pick)
    return sorted(subsets), False


def _sweep(tree, items, combine, member, cap, sample, seed, max_violations, times):
    rng = random.Random(seed)
    violations: list[dict] = []
    checked = 0
    complete = True
    for s in times:
        subsets, full = _atom_subsets(tree.nodes_at(s), cap, rng, sample)
        complete &= full
        theta = StoppingTime.constant(tree, s)
        for i, j in itertools.permutations(range(len(items)), 2):
            for A in subsets:
                checked += 1
                result = combine(items[i], items[j], theta, A)
                if not member(result):
                    violations.append({"first": i, "second": j, "time": s, "atoms": [tree.ids[n] for n in A]})
                    if len(violations) >= max_violations:
                        return violations, checked, False
    return violations, checked, complete


def check_stability(
    Q: ScenarioSet | Sequence[DensityProcess],
    use_hull: bool = False,
    cap: int = DEFAULT_SUBSET_CAP,
    sample: bool = True,
    seed: int = 0,
    max_violations: int = 10,
) -> StabilityReport:
    """Check a (+)^s_A b for generator pairs, integer times s and F_s-atom subsets A.

    Integer times suffice on a finite horizon: a concatenation at a stopping
    time is a finite chain of concatenations at the times it takes.
    """
    if not isinstance(Q, ScenarioSet):
        Q = ScenarioSet(list(Q))
    tree = Q.tree
    items = list(Q.densities)
    keys = {d.increments for d in items}
    vectors = [list(d.increments) for d in items]
    cache: dict[tuple, bool] = {}

    def member(c: DensityProcess) -> bool:
        if c.increments in keys:
            return True
        if not use_hull:
            return False
        if c.increments not in cache:
            cache[c.increments] = hull_membership(list(c.increments), vectors)[0]
        return cache[c.increments]

    times = range(tree.horizon + 1)
    violations, checked, complete = _sweep(tree, items, concat, member, cap, sample, seed, max_violations, times)
    return StabilityReport(not violations, complete, checked, violations, "hull" if use_hull else "exact")


def _leaf_key(tree: FiltrationTree, f: Mapping[int, Fraction]) -> tuple:
    return tuple(f[l] for l in tree.leaves)


def check_m_stability(
    tree: FiltrationTree,
    P: Sequence,
    use_hull: bool = False,
    cap: int = DEFAULT_SUBSET_CAP,
    sample: bool = True,
    seed: int = 0,
    max_violations: int = 10,
) -> StabilityReport:
    """Is the set of terminal densities ``P`` closed under pasting (or pasting into its hull)?"""
    dens = [check_leaf_density(tree, f) for f in P]
    keys = {_leaf_key(tree, f) for f in dens}
    vectors = [list(_leaf_key(tree, f)) for f in dens]
    cache: dict[tuple, bool] = {}

    def combine(f, g, theta, A):
        return paste_density(tree, f, g, theta, A)

    def member(h) -> bool:
        key = _leaf_key(tree, h)
        if key in keys:
            return True
        if not use_hull:
            return False
        if key not in cache:
            cache[key] = hull_membership(list(key), vectors)[0]
        return cache[key]

    times = range(tree.horizon + 1)
    violations, checked, complete = _sweep(tree, dens, combine, member, cap, sample, seed, max_violations, times)
    return StabilityReport(not violations, complete, checked, violations, "hull" if use_hull else "exact")


def _closure(start: list, key: Callable, step: Callable, gens: list, nodes: Sequence[int], limit: int) -> list:
    seen = {key(x): x for x in start}
    queue = list(start)
    while queue:
        h = queue.pop()
        for g in gens:
            for n in nodes:
                c = step(h, g, n)
                k = key(c)
                if k not in seen:
                    seen[k] = c
                    queue.append(c)
                    if len(seen) > limit:
                        raise SubsetEnumerationCapExceeded(f"closure grew beyond {limit} elements")
    return [seen[k] for k in sorted(seen)]


def concat_closure(generators: Sequence[DensityProcess], limit: int = 5000) -> list[DensityProcess]:
    """Smallest set containing the generators and stable under concatenation."""
    tree = generators[0].tree
    inner = [m for m in range(len(tree)) if tree.children[m]]

    def step(h, g, n):
        return concat(h, g, StoppingTime(tree, _antichain_with(tree, n)), [n])

    return _closure(list(generators), lambda d: d.increments, step, list(generators), inner, limit)


def m_stable_closure(tree: FiltrationTree, generators: Sequence, limit: int = 5000) -> list[dict[int, Fraction]]:
    """Smallest m-stable set of terminal densities containing the generators."""
    gens = [check_leaf_density(tree, f) for f in generators]
    inner = [m for m in range(len(tree)) if tree.children[m]]

    def step(h, g, n):
        return paste_density(tree, h, g, StoppingTime(tree, _antichain_with(tree, n)), [n])

    return _closure(gens, lambda f: _leaf_key(tree, f), step, gens, inner, limit)


def _antichain_with(tree: FiltrationTree, node: int) -> list[int]:
    """A stopping time that stops at ``node`` and at the same time elsewhere."""
    return list(tree.nodes_at(tree.times[node]))
