"""Bounded adapted processes, nonnegative increasing processes and their pairing."""
from __future__ import annotations

import enum
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping, Sequence

from .errors import NotADensity, TreeMismatch, WindowOrderViolation
from .filtration import (
    ConditionalValue,
    FiltrationTree,
    StoppingTime,
    as_stopping_time,
    to_number,
)

ZERO = Fraction(0)
ONE = Fraction(1)


def _node_vector(tree: FiltrationTree, values, default=ZERO) -> list:
    if isinstance(values, Mapping):
        out = [default] * len(tree)
        for key, v in values.items():
            out[tree.node(key)] = to_number(v)
        return out
    values = list(values)
    if len(values) != len(tree):
        raise ValueError(f"expected {len(tree)} node values, got {len(values)}")
    return [to_number(v) for v in values]


def _window(tree, tau, theta) -> tuple[StoppingTime, StoppingTime]:
    tau = as_stopping_time(tree, tau, 0)
    theta = as_stopping_time(tree, theta, tree.horizon)
    if not tau <= theta:
        raise WindowOrderViolation(f"window start {tau} is not <= end {theta}")
    return tau, theta


def window_nodes(tree: FiltrationTree, node: int, theta: StoppingTime) -> list[int]:
    """Nodes in the subtree of ``node`` that are not strictly after ``theta``."""
    out = []
    stack = [node]
    while stack:
        m = stack.pop()
        out.append(m)
        if m not in theta.stops:
            stack.extend(reversed(tree.children[m]))
    return out


class AdaptedProcess:
    """One value per node, stored in projected form for its window [tau, theta].

    Values strictly before ``tau`` are zero and values after ``theta`` are
    frozen at the ``theta`` value on each path.
    """

    __slots__ = ("tree", "values", "tau", "theta")

    def __init__(self, tree: FiltrationTree, values, tau=None, theta=None):
        self.tree = tree
        self.tau, self.theta = _window(tree, tau, theta)
        raw = _node_vector(tree, values)
        out = []
        for m in range(len(tree)):
            if self.tau.stop_of(m) is None:
                out.append(ZERO)
                continue
            s = self.theta.stop_of(m)
            out.append(raw[m] if s is None or s == m else raw[s])
        self.values = tuple(out)

    @classmethod
    def from_function(cls, tree, fn: Callable[[int], Any], tau=None, theta=None) -> "AdaptedProcess":
        return cls(tree, [fn(m) for m in range(len(tree))], tau, theta)

    @classmethod
    def constant(cls, tree, c, tau=None, theta=None) -> "AdaptedProcess":
        return cls(tree, [to_number(c)] * len(tree), tau, theta)

    @classmethod
    def zero(cls, tree) -> "AdaptedProcess":
        return cls(tree, [ZERO] * len(tree))

    def __getitem__(self, node: int | str):
        return self.values[self.tree.node(node)]

    def __len__(self) -> int:
        return len(self.values)

    def by_id(self) -> dict[str, Any]:
        return {self.tree.ids[i]: v for i, v in enumerate(self.values)}

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self.by_id().items())
        return f"AdaptedProcess({{{body}}})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AdaptedProcess):
            return NotImplemented
        return self.tree is other.tree and self.values == other.values

    def __hash__(self) -> int:
        return hash(self.values)

    def _same_tree(self, other: "AdaptedProcess") -> None:
        if other.tree is not self.tree:
            raise TreeMismatch("processes live on different trees")

    def _result_window(self, other: "AdaptedProcess"):
        if self.tau == other.tau and self.theta == other.theta:
            return self.tau, self.theta
        return None, None

    def __add__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        self._same_tree(other)
        return AdaptedProcess(self.tree, [x + y for x, y in zip(self.values, other.values)], *self._result_window(other))

    def __sub__(self, other: "AdaptedProcess") -> "AdaptedProcess":
        self._same_tree(other)
        return AdaptedProcess(self.tree, [x - y for x, y in zip(self.values, other.values)], *self._result_window(other))

    def __neg__(self) -> "AdaptedProcess":
        return AdaptedProcess(self.tree, [-x for x in self.values], self.tau, self.theta)

    def scale(self, c) -> "AdaptedProcess":
        """Multiply by a constant or by an F_tau value (a ConditionalValue anchored at tau)."""
        if isinstance(c, ConditionalValue):
            vals = []
            for m, x in enumerate(self.values):
                s = c.anchor.stop_of(m)
                vals.append(x * c.values[s] if s is not None else x * 0)
            return AdaptedProcess(self.tree, vals, self.tau, self.theta)
        return AdaptedProcess(self.tree, [c * x for x in self.values], self.tau, self.theta)

    __rmul__ = scale

    def shift(self, m, tau=None) -> "AdaptedProcess":
        """``X + m 1_[tau, inf)`` for a constant or an F_tau value ``m``."""
        if tau is None:
            tau = m.anchor if isinstance(m, ConditionalValue) else self.tau
        return self + cash(self.tree, m, tau).with_window(self.tau, self.theta)

    def restrict(self, nodes: Iterable[int]) -> "AdaptedProcess":
        """``1_A X`` for the event A made of the subtrees of ``nodes``."""
        keep = set()
        for n in nodes:
            keep.update(self.tree.subtree(n))
        return AdaptedProcess(
            self.tree, [x if m in keep else x * 0 for m, x in enumerate(self.values)], self.tau, self.theta
        )

    def with_window(self, tau=None, theta=None) -> "AdaptedProcess":
        return AdaptedProcess(self.tree, self.values, tau, theta)

    def leaf_values(self) -> dict[int, Any]:
        return {l: self.values[l] for l in self.tree.leaves}

    def at_stopping_time(self, xi) -> ConditionalValue:
        """X_xi as an F_xi value."""
        xi = as_stopping_time(self.tree, xi)
        return ConditionalValue(xi, {s: self.values[s] for s in xi.stops})

    def is_exact(self) -> bool:
        return all(isinstance(v, Fraction) for v in self.values)


def cash(tree: FiltrationTree, m, tau=None) -> AdaptedProcess:
    """The process ``m 1_[tau, inf)`` for a constant or an F_tau value ``m``."""
    if isinstance(m, ConditionalValue):
        tau = m.anchor
        vals = []
        for node in range(len(tree)):
            s = tau.stop_of(node)
            vals.append(m.values[s] if s is not None else ZERO)
        return AdaptedProcess(tree, vals, tau)
    tau = as_stopping_time(tree, tau, 0)
    return AdaptedProcess(tree, [to_number(m)] * len(tree), tau)


def project(X: AdaptedProcess, tau, theta=None) -> AdaptedProcess:
    """pi_{tau,theta}(X): zero before tau, X on the window, frozen after theta."""
    return AdaptedProcess(X.tree, X.values, tau, theta)


def sup_norm(X: AdaptedProcess, tau=None, theta=None) -> ConditionalValue:
    tree = X.tree
    tau, theta = _window(tree, tau, theta)
    return ConditionalValue(tau, {n: max(abs(X.values[m]) for m in window_nodes(tree, n, theta)) for n in tau.stops})


class DensityProcess:
    """A nonnegative increasing process given by its increments per node."""

    __slots__ = ("tree", "increments")

    def __init__(self, tree: FiltrationTree, increments):
        self.tree = tree
        inc = tuple(_node_vector(tree, increments))
        for m, d in enumerate(inc):
            if d < 0:
                raise NotADensity(f"negative increment {d} at node {tree.ids[m]}")
        self.increments = inc

    def __getitem__(self, node: int | str):
        return self.increments[self.tree.node(node)]

    def cumulative(self, node: int):
        return sum((self.increments[m] for m in self.tree.path(node)), ZERO)

    def by_id(self) -> dict[str, Any]:
        return {self.tree.ids[i]: v for i, v in enumerate(self.increments) if v != 0}

    def __repr__(self) -> str:
        body = ", ".join(f"{k}: {v}" for k, v in self.by_id().items())
        return f"DensityProcess({{{body}}})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DensityProcess):
            return NotImplemented
        return self.tree is other.tree and self.increments == other.increments

    def __hash__(self) -> int:
        return hash(self.increments)

    def __add__(self, other: "DensityProcess") -> "DensityProcess":
        if other.tree is not self.tree:
            raise TreeMismatch("densities live on different trees")
        return DensityProcess(self.tree, [x + y for x, y in zip(self.increments, other.increments)])

    def scale(self, c) -> "DensityProcess":
        return DensityProcess(self.tree, [c * x for x in self.increments])

    __rmul__ = scale

    def mass(self, tau=None, theta=None) -> ConditionalValue:
        """<1, a>_{tau,theta}."""
        return pairing(AdaptedProcess.constant(self.tree, ONE), self, tau, theta)

    def l1_norm(self):
        return sum((self.tree.prob[m] * self.increments[m] for m in range(len(self.tree))), ZERO)


def mixture(weights: Sequence, densities: Sequence[DensityProcess]) -> DensityProcess:
    tree = densities[0].tree
    acc = [ZERO] * len(tree)
    for w, d in zip(weights, densities):
        for m, x in enumerate(d.increments):
            acc[m] += w * x
    return DensityProcess(tree, acc)


def pairing(X: AdaptedProcess, a: DensityProcess, tau=None, theta=None) -> ConditionalValue:
    """<X, a>_{tau,theta} = E[sum over window of X_t da_t | F_tau], one value per tau-atom."""
    if X.tree is not a.tree:
        raise TreeMismatch("process and density live on different trees")
    tree = X.tree
    tau, theta = _window(tree, tau, theta)
    out = {}
    for n in tau.stops:
        acc = ZERO
        for m in window_nodes(tree, n, theta):
            d = a.increments[m]
            if d:
                acc += tree.prob[m] * X.values[m] * d
        out[n] = acc / tree.prob[n]
    return ConditionalValue(tau, out)


class Classification(enum.Enum):
    IN_D_E = "IN_D_E"
    IN_D = "IN_D"
    NOT_IN_D = "NOT_IN_D"


def classify_density(a: DensityProcess, tau=None, theta=None) -> Classification:
    tree = a.tree
    tau, theta = _window(tree, tau, theta)
    inside = set()
    for n in tau.stops:
        inside.update(window_nodes(tree, n, theta))
    if any(a.increments[m] != 0 for m in range(len(tree)) if m not in inside):
        return Classification.NOT_IN_D
    if any(v != 1 for v in a.mass(tau, theta).values.values()):
        return Classification.NOT_IN_D
    # residual mass from t ^ theta onwards must be positive on every path, for every t
    for leaf in tree.leaves:
        path = tree.path(leaf)
        stop = theta.time_at_leaf(leaf)
        for t in range(tree.horizon + 1):
            start = min(t, stop)
            if sum((a.increments[m] for m in path[start : stop + 1]), ZERO) <= 0:
                return Classification.IN_D
    return Classification.IN_D_E


def leaf_function(tree: FiltrationTree, values) -> dict[int, Any]:
    """Normalise a leaf function given by id mapping or a leaf-ordered sequence."""
    if isinstance(values, Mapping):
        out = {tree.node(k): to_number(v) for k, v in values.items()}
    else:
        out = dict(zip(tree.leaves, (to_number(v) for v in values)))
    if set(out) != set(tree.leaves):
        raise ValueError("leaf function must be defined on exactly the leaves")
    return out
