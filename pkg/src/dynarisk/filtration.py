"""Finite filtered probability spaces represented as rooted trees.

Nodes at time ``t`` are the atoms of ``F_t``; leaves carry the probabilities.
Internally nodes are addressed by integer index, externally by string id.
"""
from __future__ import annotations

import itertools
import math
from fractions import Fraction
from functools import cached_property
from typing import Any, Iterable, Iterator, Mapping, Sequence

from .errors import (
    AnchorMismatch,
    EnumerationCapExceeded,
    InvalidStoppingTime,
    NonTreeShape,
    ProbNotNormalized,
    ZeroProbabilityNode,
)

DEFAULT_ENUMERATION_CAP = 10_000

NEG_INF = float("-inf")
POS_INF = float("inf")


def to_number(value: Any):
    """Parse a fixture number: ints and "p/q" strings become Fractions."""
    if isinstance(value, (Fraction, float)):
        return value
    if isinstance(value, bool):
        raise ValueError(f"not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "+inf", "infinity"):
            return POS_INF
        if text in ("-inf", "-infinity"):
            return NEG_INF
        return Fraction(text)
    raise ValueError(f"not a number: {value!r}")


class FiltrationTree:
    """Immutable rooted tree; build it with :func:`build_tree`."""

    def __init__(self, ids, times, parents, children, prob, horizon, name=None):
        self.ids: tuple[str, ...] = tuple(ids)
        self.times: tuple[int, ...] = tuple(times)
        self.parents: tuple[int | None, ...] = tuple(parents)
        self.children: tuple[tuple[int, ...], ...] = tuple(tuple(c) for c in children)
        self.prob: tuple[Fraction, ...] = tuple(prob)
        self.horizon: int = horizon
        self.name = name
        self.index = {node_id: i for i, node_id in enumerate(self.ids)}

    def __repr__(self) -> str:
        label = self.name or "tree"
        return f"<FiltrationTree {label}: T={self.horizon}, {len(self)} nodes, {len(self.leaves)} leaves>"

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def root(self) -> int:
        return 0

    def node(self, ref: int | str) -> int:
        if isinstance(ref, str):
            try:
                return self.index[ref]
            except KeyError:
                raise KeyError(f"unknown node id {ref!r}") from None
        return ref

    def time(self, node: int) -> int:
        return self.times[node]

    def is_leaf(self, node: int) -> bool:
        return not self.children[node]

    @cached_property
    def leaves(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self)) if not self.children[i])

    @cached_property
    def levels(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.horizon + 1)]
        for i, t in enumerate(self.times):
            out[t].append(i)
        return tuple(tuple(level) for level in out)

    def nodes_at(self, t: int) -> tuple[int, ...]:
        return self.levels[t]

    @cached_property
    def _subtrees(self) -> tuple[tuple[int, ...], ...]:
        subs: list[tuple[int, ...]] = [()] * len(self)
        for i in reversed(range(len(self))):
            subs[i] = (i,) + tuple(itertools.chain.from_iterable(subs[c] for c in self.children[i]))
        return tuple(subs)

    def subtree(self, node: int) -> tuple[int, ...]:
        """Descendants of ``node`` including itself, parents before children."""
        return self._subtrees[node]

    @cached_property
    def _leaves_under(self) -> tuple[tuple[int, ...], ...]:
        return tuple(tuple(m for m in sub if not self.children[m]) for sub in self._subtrees)

    def leaves_under(self, node: int) -> tuple[int, ...]:
        return self._leaves_under[node]

    @cached_property
    def _paths(self) -> tuple[tuple[int, ...], ...]:
        paths: list[tuple[int, ...]] = [()] * len(self)
        for i in range(len(self)):
            p = self.parents[i]
            paths[i] = (i,) if p is None else paths[p] + (i,)
        return tuple(paths)

    def path(self, node: int) -> tuple[int, ...]:
        """Root-to-node path, root first."""
        return self._paths[node]

    def ancestor_at(self, node: int, t: int) -> int:
        path = self._paths[node]
        if t > self.times[node] or t < 0:
            raise ValueError(f"no ancestor of node {self.ids[node]} at time {t}")
        return path[t]

    def is_ancestor(self, anc: int, node: int) -> bool:
        """True when ``anc`` is an ancestor of ``node`` or the node itself."""
        t = self.times[anc]
        return t <= self.times[node] and self._paths[node][t] == anc

    def cond_prob(self, node: int, given: int) -> Fraction:
        return self.prob[node] / self.prob[given]


def build_tree(spec: Mapping[str, Any]) -> FiltrationTree:
    """Validate a tree description and return a :class:`FiltrationTree`.

    ``spec`` has the fixture layout ``{horizon, nodes: [{id, time, parent}],
    leaf_probs: {id: "p/q"}}``.
    """
    try:
        horizon = int(spec["horizon"])
        raw_nodes = list(spec["nodes"])
        raw_probs = dict(spec["leaf_probs"])
    except (KeyError, TypeError, ValueError) as exc:
        raise NonTreeShape(f"malformed tree description: {exc}") from exc
    if horizon < 0:
        raise NonTreeShape("horizon must be >= 0")

    by_id: dict[str, tuple[int, str | None]] = {}
    order: list[str] = []
    for item in raw_nodes:
        node_id = str(item["id"])
        if node_id in by_id:
            raise NonTreeShape(f"duplicate node id {node_id!r}")
        parent = item.get("parent")
        by_id[node_id] = (int(item["time"]), None if parent is None else str(parent))
        order.append(node_id)

    roots = [n for n in order if by_id[n][1] is None]
    if len(roots) != 1:
        raise NonTreeShape(f"expected exactly one root, found {len(roots)}")
    if by_id[roots[0]][0] != 0:
        raise NonTreeShape("root must sit at time 0")

    kids: dict[str, list[str]] = {n: [] for n in order}
    for n in order:
        t, parent = by_id[n]
        if parent is None:
            continue
        if parent not in by_id:
            raise NonTreeShape(f"node {n!r} has unknown parent {parent!r}")
        if by_id[parent][0] != t - 1:
            raise NonTreeShape(f"node {n!r} at time {t} has parent at time {by_id[parent][0]}")
        kids[parent].append(n)

    # breadth-first order keeps every level contiguous and parents first
    ids: list[str] = []
    queue = [roots[0]]
    while queue:
        ids.extend(queue)
        queue = [c for n in queue for c in kids[n]]
    if len(ids) != len(order):
        raise NonTreeShape("some nodes are not reachable from the root")

    index = {n: i for i, n in enumerate(ids)}
    times = [by_id[n][0] for n in ids]
    parents = [None if by_id[n][1] is None else index[by_id[n][1]] for n in ids]
    children = [[index[c] for c in kids[n]] for n in ids]
    for n, ch in zip(ids, children):
        if not ch and by_id[n][0] != horizon:
            raise NonTreeShape(f"leaf {n!r} is not at the horizon {horizon}")
        if by_id[n][0] > horizon:
            raise NonTreeShape(f"node {n!r} lies beyond the horizon")

    leaf_ids = {ids[i] for i, ch in enumerate(children) if not ch}
    extra = set(raw_probs) - leaf_ids
    if extra:
        raise NonTreeShape(f"probabilities given for non-leaf nodes: {sorted(extra)}")
    missing = leaf_ids - set(raw_probs)
    if missing:
        raise ProbNotNormalized(f"missing leaf probabilities: {sorted(missing)}")

    prob: list[Fraction] = [Fraction(0)] * len(ids)
    for n in leaf_ids:
        p = to_number(raw_probs[n])
        if not isinstance(p, Fraction):
            p = Fraction(str(p))
        if p <= 0:
            raise ZeroProbabilityNode(f"leaf {n!r} has probability {p}")
        if p > 1:
            raise ProbNotNormalized(f"leaf {n!r} has probability {p} > 1")
        prob[index[n]] = p
    total = sum(prob[index[n]] for n in leaf_ids)
    if total != 1:
        raise ProbNotNormalized(f"leaf probabilities sum to {total}, not 1")
    for i in reversed(range(len(ids))):
        if children[i]:
            prob[i] = sum(prob[c] for c in children[i])

    return FiltrationTree(ids, times, parents, children, prob, horizon, name=spec.get("name"))


def tree_to_spec(tree: FiltrationTree) -> dict[str, Any]:
    spec: dict[str, Any] = {
        "horizon": tree.horizon,
        "nodes": [
            {
                "id": tree.ids[i],
                "time": tree.times[i],
                "parent": None if tree.parents[i] is None else tree.ids[tree.parents[i]],
            }
            for i in range(len(tree))
        ],
        "leaf_probs": {tree.ids[i]: str(tree.prob[i]) for i in tree.leaves},
    }
    if tree.name:
        spec["name"] = tree.name
    return spec


class StoppingTime:
    """A finite stopping time given by the antichain of nodes where it stops."""

    __slots__ = ("tree", "stops", "_stop_of")

    def __init__(self, tree: FiltrationTree, stops: Iterable[int | str]):
        self.tree = tree
        self.stops = frozenset(tree.node(s) for s in stops)
        stop_of: list[int | None] = [None] * len(tree)
        for leaf in tree.leaves:
            hits = [m for m in tree.path(leaf) if m in self.stops]
            if len(hits) != 1:
                raise InvalidStoppingTime(
                    f"path to leaf {tree.ids[leaf]} is stopped {len(hits)} times"
                )
        for s in self.stops:
            for m in tree.subtree(s):
                stop_of[m] = s
        self._stop_of = tuple(stop_of)

    @classmethod
    def constant(cls, tree: FiltrationTree, t: int) -> "StoppingTime":
        if not 0 <= t <= tree.horizon:
            raise InvalidStoppingTime(f"constant time {t} outside [0, {tree.horizon}]")
        return cls(tree, tree.nodes_at(t))

    def __eq__(self, other: object) -> bool:
        return isinstance(other, StoppingTime) and self.tree is other.tree and self.stops == other.stops

    def __hash__(self) -> int:
        return hash(self.stops)

    def __repr__(self) -> str:
        c = self.constant_value()
        if c is not None:
            return f"StoppingTime(≡{c})"
        names = sorted(self.tree.ids[s] for s in self.stops)
        return f"StoppingTime({names})"

    def sorted_stops(self) -> list[int]:
        return sorted(self.stops)

    def stop_of(self, node: int) -> int | None:
        """Stop node on or above ``node``; None if the time has not stopped yet there."""
        return self._stop_of[node]

    def time_at_leaf(self, leaf: int) -> int:
        return self.tree.times[self._stop_of[leaf]]

    def constant_value(self) -> int | None:
        ts = {self.tree.times[s] for s in self.stops}
        return ts.pop() if len(ts) == 1 else None

    def __le__(self, other: "StoppingTime") -> bool:
        return all(self.time_at_leaf(l) <= other.time_at_leaf(l) for l in self.tree.leaves)

    def covers(self, node: int) -> bool:
        """True when ``node`` lies at or before the stop on its paths (t <= theta)."""
        s = self._stop_of[node]
        return s is None or s == node

    def stops_under(self, node: int) -> list[int]:
        """Stop nodes in the subtree of ``node`` (requires stopping at or after ``node``)."""
        s = self._stop_of[node]
        if s is not None:
            return [s] if s == node else []
        return [m for m in self.tree.subtree(node) if m in self.stops]


def as_stopping_time(tree: FiltrationTree, value: "StoppingTime | int | None", default: int = 0) -> StoppingTime:
    if value is None:
        value = default
    if isinstance(value, StoppingTime):
        if value.tree is not tree:
            raise AnchorMismatch("stopping time lives on another tree")
        return value
    return StoppingTime.constant(tree, int(value))


def is_valid_stopping_set(tree: FiltrationTree, stops: Iterable[int]) -> bool:
    """Validator: every root-to-leaf path meets the set exactly once."""
    chosen = set(stops)
    return all(sum(1 for m in tree.path(l) if m in chosen) == 1 for l in tree.leaves)


def count_stopping_times(tree: FiltrationTree, floor: int = 0) -> int:
    counts = [0] * len(tree)
    for m in reversed(range(len(tree))):
        below = math.prod(counts[c] for c in tree.children[m]) if tree.children[m] else 0
        counts[m] = below + (1 if tree.times[m] >= floor else 0)
    return counts[tree.root]


def enumerate_stopping_times(
    tree: FiltrationTree, floor: int = 0, cap: int = DEFAULT_ENUMERATION_CAP
) -> list[StoppingTime]:
    """All stopping times with ``floor <= theta <= T`` (each path stopped exactly once)."""
    if not 0 <= floor <= tree.horizon:
        raise ValueError(f"floor {floor} outside [0, {tree.horizon}]")
    total = count_stopping_times(tree, floor)
    if total > cap:
        raise EnumerationCapExceeded(f"{total} stopping times exceed the cap {cap}")

    def options(m: int) -> list[frozenset[int]]:
        out: list[frozenset[int]] = []
        if tree.times[m] >= floor:
            out.append(frozenset((m,)))
        if tree.children[m]:
            for combo in itertools.product(*(options(c) for c in tree.children[m])):
                out.append(frozenset().union(*combo))
        return out

    return [StoppingTime(tree, s) for s in options(tree.root)]


class ConditionalValue:
    """An F_tau-measurable extended real: one value per stop node of ``anchor``."""

    __slots__ = ("anchor", "values")

    def __init__(self, anchor: StoppingTime, values: Mapping[int, Any]):
        self.anchor = anchor
        if set(values) != set(anchor.stops):
            raise AnchorMismatch("values must be given on exactly the anchor's stop nodes")
        self.values = dict(values)

    @property
    def tree(self) -> FiltrationTree:
        return self.anchor.tree

    @classmethod
    def constant(cls, anchor: StoppingTime, value) -> "ConditionalValue":
        return cls(anchor, {s: value for s in anchor.stops})

    def __getitem__(self, node: int | str):
        return self.values[self.tree.node(node)]

    def __iter__(self) -> Iterator[int]:
        return iter(sorted(self.values))

    def items(self):
        return sorted(self.values.items())

    def by_id(self) -> dict[str, Any]:
        return {self.tree.ids[n]: v for n, v in self.items()}

    def at_node(self, node: int):
        """Value on the anchor atom containing ``node`` (node must be at/after the anchor)."""
        s = self.anchor.stop_of(node)
        if s is None:
            raise AnchorMismatch(f"node {self.tree.ids[node]} is strictly before the anchor")
        return self.values[s]

    def to_leaves(self) -> dict[int, Any]:
        return {l: self.values[self.anchor.stop_of(l)] for l in self.tree.leaves}

    def _check(self, other: "ConditionalValue") -> None:
        if self.anchor != other.anchor:
            raise AnchorMismatch("conditional values have different anchors")

    def _combine(self, other, op) -> "ConditionalValue":
        if isinstance(other, ConditionalValue):
            self._check(other)
            return ConditionalValue(self.anchor, {k: op(v, other.values[k]) for k, v in self.values.items()})
        return ConditionalValue(self.anchor, {k: op(v, other) for k, v in self.values.items()})

    def __add__(self, other):
        return self._combine(other, lambda x, y: x + y)

    def __sub__(self, other):
        return self._combine(other, lambda x, y: x - y)

    def __mul__(self, other):
        return self._combine(other, lambda x, y: x * y)

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return ConditionalValue(self.anchor, {k: -v for k, v in self.values.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ConditionalValue):
            return NotImplemented
        return self.anchor == other.anchor and self.values == other.values

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self.by_id().items())
        return f"ConditionalValue({{{body}}})"

    def allclose(self, other: "ConditionalValue", tol: float = 1e-9) -> bool:
        self._check(other)
        return all(values_close(v, other.values[k], tol) for k, v in self.values.items())

    def max_abs_diff(self, other: "ConditionalValue") -> float:
        self._check(other)
        worst = 0.0
        for k, v in self.values.items():
            w = other.values[k]
            if v == w:
                continue
            worst = max(worst, abs(float(v) - float(w)))
        return worst


def values_close(x, y, tol: float = 1e-9) -> bool:
    if x == y:
        return True
    if isinstance(x, Fraction) and isinstance(y, Fraction):
        return False
    if math.isinf(float(x)) or math.isinf(float(y)):
        return False
    return abs(float(x) - float(y)) <= tol


def conditional_expectation(tree: FiltrationTree, f: Mapping[int, Any] | Sequence, theta) -> ConditionalValue:
    """E[f | F_theta] for a leaf function ``f`` (mapping leaf index -> value).

    A sequence is read in leaf order. Extended reals propagate: a -inf on a
    positive-probability leaf makes the conditional value -inf.
    """
    theta = as_stopping_time(tree, theta)
    if not isinstance(f, Mapping):
        f = dict(zip(tree.leaves, f))
    missing = [l for l in tree.leaves if l not in f]
    if missing:
        raise AnchorMismatch("leaf function is not defined on every leaf")
    out = {}
    for s in theta.stops:
        acc = sum((tree.prob[l] * f[l] for l in tree.leaves_under(s)), Fraction(0))
        out[s] = acc / tree.prob[s]
    return ConditionalValue(theta, out)


def condition_value(value: ConditionalValue, tau) -> ConditionalValue:
    """E[value | F_tau] for a value anchored at a later stopping time."""
    tau = as_stopping_time(value.tree, tau)
    if not tau <= value.anchor:
        raise AnchorMismatch("conditioning requires tau <= anchor")
    return conditional_expectation(value.tree, value.to_leaves(), tau)
