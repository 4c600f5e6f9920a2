"""Conditional utility functionals and utility processes on a finite tree.

A utility process assigns to every node ``n`` at time ``t`` the value
``phi_{t,end}(X)`` on the atom ``n``. Conditioning at a stopping time stitches
these node values together, which is all that ``UtilityFunctional`` does.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Sequence

from .composition import (
    Mode,
    build_density,
    check_leaf_density,
    check_weights,
    m_stable_closure,
    node_expectations,
    normalize_from,
)
from .errors import (
    EmptyScenarioSet,
    LPFailure,
    NonPositiveDensity,
    NormalizationViolation,
    TreeMismatch,
    WindowViolation,
)
from .filtration import (
    NEG_INF,
    POS_INF,
    ConditionalValue,
    FiltrationTree,
    StoppingTime,
    as_stopping_time,
    enumerate_stopping_times,
    to_number,
)
from .optim import LinearProgram, Status, lp_solve
from .processes import AdaptedProcess, DensityProcess, project, sup_norm, window_nodes

ZERO = Fraction(0)
ONE = Fraction(1)
DEFAULT_TOL = 1e-9


def _is_exact(v) -> bool:
    return isinstance(v, (int, Fraction))


def ge_tol(x, y, tol: float = DEFAULT_TOL) -> bool:
    """x >= y, exactly for rationals and up to ``tol`` otherwise."""
    if _is_exact(x) and _is_exact(y):
        return x >= y
    if x == y:
        return True
    return float(x) >= float(y) - tol


# ---------------------------------------------------------------- one-step bases


class Base:
    """A family psi_t of final-value functionals built from terminal densities ``P``.

    ``psi(node, items)`` evaluates psi at the atom ``node`` for a payoff given
    as ``(stop_node, value)`` pairs over an antichain below ``node``.
    """

    kind = "base"
    coherent = True

    def __init__(self, tree: FiltrationTree, P: Sequence):
        if not P:
            raise EmptyScenarioSet("a base needs at least one density")
        self.tree = tree
        self.densities = [check_leaf_density(tree, f) for f in P]
        self.node_exp = [node_expectations(tree, f) for f in self.densities]

    def psi(self, node: int, items: Sequence[tuple[int, object]]):
        raise NotImplementedError

    def apply(self, Y: Mapping[int, object], node: int):
        """psi at ``node`` of a payoff given on an antichain (mapping node -> value)."""
        return self.psi(node, [(s, v) for s, v in Y.items() if self.tree.is_ancestor(node, s)])


class LinearBase(Base):
    """psi_t(Y) = min over f of E[f Y | F_t] / E[f | F_t]."""

    kind = "linear"
    coherent = True

    def psi(self, node, items):
        tree = self.tree
        best = POS_INF
        for fn in self.node_exp:
            denom = tree.prob[node] * fn[node]
            if denom == 0:
                continue
            v = sum((tree.prob[s] * fn[s] * y for s, y in items), ZERO) / denom
            if v < best:
                best = v
        return best


class EntropicBase(Base):
    """psi_t(Y) = min over f of -log(E[f exp(-Y) | F_t] / E[f | F_t]), in floats."""

    kind = "entropic"
    coherent = False

    def __init__(self, tree, P):
        super().__init__(tree, P)
        for f in self.densities:
            if any(v <= 0 for v in f.values()):
                raise NonPositiveDensity("entropic densities must be strictly positive")

    def psi(self, node, items):
        tree = self.tree
        best = math.inf
        for fn in self.node_exp:
            denom = tree.prob[node] * fn[node]
            logs = [math.log(tree.prob[s] * fn[s] / denom) - float(y) for s, y in items]
            top = max(logs)
            lse = top + math.log(sum(math.exp(v - top) for v in logs))
            best = min(best, -lse)
        return best


# ---------------------------------------------------------------- penalties


class PenaltyFunction:
    """Penalty values gamma_b(n) in [-inf, 0], one per scenario b and node n.

    At every node the largest penalty over the scenarios must be exactly 0.
    """

    def __init__(self, tree: FiltrationTree, table: Sequence):
        self.tree = tree
        rows = []
        for entry in table:
            if isinstance(entry, Mapping):
                row = [ZERO] * len(tree)
                for k, v in entry.items():
                    row[tree.node(k)] = to_number(v)
            elif isinstance(entry, (list, tuple)):
                if len(entry) != len(tree):
                    raise ValueError("penalty rows need one value per node")
                row = [to_number(v) for v in entry]
            else:
                row = [to_number(entry)] * len(tree)
            if any(v > 0 for v in row):
                raise NormalizationViolation("penalties must be <= 0")
            rows.append(tuple(row))
        if not rows:
            raise EmptyScenarioSet("empty penalty table")
        for m in range(len(tree)):
            if max(r[m] for r in rows) != 0:
                raise NormalizationViolation(f"penalty sup at node {tree.ids[m]} is not 0")
        self.rows = tuple(rows)

    def value(self, i: int, node: int):
        return self.rows[i][node]

    def __len__(self) -> int:
        return len(self.rows)


# ---------------------------------------------------------------- processes


class UtilityProcess:
    """Base class for (phi_{t,end})_{t=start..end}."""

    tag = "PROCESS"
    coherent = False

    def __init__(self, tree: FiltrationTree, start: int = 0, end: int | None = None):
        end = tree.horizon if end is None else end
        if not 0 <= start <= end <= tree.horizon:
            raise WindowViolation(f"bad time range [{start}, {end}]")
        self.tree = tree
        self.start = start
        self.end = end
        self.end_time = StoppingTime.constant(tree, end)

    def node_value(self, X: AdaptedProcess, node: int):
        raise NotImplementedError

    def _check_tau(self, tau) -> StoppingTime:
        tau = as_stopping_time(self.tree, tau, self.start)
        for s in tau.stops:
            if not self.start <= self.tree.times[s] <= self.end:
                raise WindowViolation(f"stop node {self.tree.ids[s]} outside [{self.start}, {self.end}]")
        return tau

    def evaluate(self, X: AdaptedProcess, tau=None, theta=None) -> ConditionalValue:
        """phi_{tau,theta}(X), stitched from the node values at the stops of tau."""
        if X.tree is not self.tree:
            raise TreeMismatch("process lives on another tree")
        tau = self._check_tau(tau)
        theta = as_stopping_time(self.tree, theta, self.end)
        if not theta <= self.end_time:
            raise WindowViolation("window end exceeds the process horizon")
        Xp = project(X, tau, theta)
        return ConditionalValue(tau, {n: self.node_value(Xp, n) for n in tau.stops})

    def values_at(self, X: AdaptedProcess, t: int) -> ConditionalValue:
        return self.evaluate(X, t)

    def at(self, tau=None, theta=None) -> "UtilityFunctional":
        return UtilityFunctional(self, self._check_tau(tau), as_stopping_time(self.tree, theta, self.end))

    def end_nodes_under(self, node: int) -> tuple[int, ...]:
        return tuple(m for m in self.tree.subtree(node) if self.tree.times[m] == self.end)


class RobustProcess(UtilityProcess):
    """phi_t(X) = min over scenarios b of <X, b>_{t,end} / <1, b>_{t,end} - gamma_b.

    Without a penalty, scenarios with no mass left on an atom are skipped
    (value +inf if none remain). With a penalty, such scenarios act as the
    unit point mass at t, as the normalized shift prescribes.
    """

    tag = "ROBUST"

    def __init__(self, tree, scenarios: Sequence[DensityProcess], penalty: PenaltyFunction | None = None, start=0, end=None):
        super().__init__(tree, start, end)
        if not scenarios:
            raise EmptyScenarioSet("robust process needs at least one scenario")
        if any(b.tree is not tree for b in scenarios):
            raise TreeMismatch("scenario lives on another tree")
        if penalty is not None and len(penalty) != len(scenarios):
            raise ValueError("penalty table must have one row per scenario")
        self.scenarios = tuple(scenarios)
        self.penalty = penalty
        self.coherent = penalty is None

    def _gamma(self, i: int, node: int):
        return ZERO if self.penalty is None else self.penalty.value(i, node)

    def scenario_terms(self, node: int) -> list[tuple[int, dict[int, Fraction] | None, object]]:
        """Per scenario: (index, normalized node weights or None for a point mass at node, gamma)."""
        tree = self.tree
        nodes = window_nodes(tree, node, self.end_time)
        out = []
        for i, b in enumerate(self.scenarios):
            g = self._gamma(i, node)
            if g == NEG_INF:
                continue
            w = {m: tree.prob[m] * b.increments[m] for m in nodes if b.increments[m]}
            mass = sum(w.values(), ZERO)
            if mass == 0:
                if self.penalty is None:
                    continue
                out.append((i, None, g))
            else:
                out.append((i, {m: v / mass for m, v in w.items()}, g))
        return out

    def node_value(self, X, node):
        best = POS_INF
        for _, w, g in self.scenario_terms(node):
            v = X.values[node] if w is None else sum((c * X.values[m] for m, c in w.items()), ZERO)
            v = v - g
            if v < best:
                best = v
        return best


class EntropicProcess(UtilityProcess):
    """Robust entropic utility: psi applied to X_end, min over strictly positive f."""

    tag = "ENTROPIC"

    def __init__(self, tree, P: Sequence, start=0, end=None):
        super().__init__(tree, start, end)
        self.base = EntropicBase(tree, P)

    def node_value(self, X, node):
        return self.base.psi(node, [(s, X.values[s]) for s in self.end_nodes_under(node)])


class Aggregation(enum.Enum):
    INF_TIME = "INF_TIME"
    WEIGHTED = "WEIGHTED"


class AggregatedProcess(UtilityProcess):
    """min over f of the f-expectation of a path-wise aggregate of X over [t, end]."""

    tag = "AGGREGATED"
    coherent = True

    def __init__(self, tree, P: Sequence, agg: Aggregation | str, weights=None, start=0, end=None):
        super().__init__(tree, start, end)
        self.agg = Aggregation(agg.upper()) if isinstance(agg, str) else agg
        self.base = LinearBase(tree, P)
        self.weights = None
        if self.agg is Aggregation.WEIGHTED:
            if weights is None:
                raise ValueError("WEIGHTED aggregation needs weights")
            self.weights = check_weights(tree, weights)

    def _aggregate(self, X, node) -> dict[int, object]:
        tree = self.tree
        t = tree.times[node]
        out: dict[int, object] = {}
        if self.agg is Aggregation.INF_TIME:
            stack = [(node, X.values[node])]
            while stack:
                m, acc = stack.pop()
                acc = min(acc, X.values[m])
                if tree.times[m] == self.end:
                    out[m] = acc
                else:
                    stack.extend((c, acc) for c in tree.children[m])
            return out
        mu = self.weights
        tail = sum(mu[t : self.end + 1], ZERO)
        stack = [(node, ZERO)]
        while stack:
            m, acc = stack.pop()
            acc = acc + mu[tree.times[m]] * X.values[m]
            if tree.times[m] == self.end:
                out[m] = acc / tail
            else:
                stack.extend((c, acc) for c in tree.children[m])
        return out

    def node_value(self, X, node):
        return self.base.psi(node, list(self._aggregate(X, node).items()))


class WorstStoppingProcess(UtilityProcess):
    """phi_t(X) = S_t(X) for the Snell recursion S = X ^ psi(S_next) driven by ``base``."""

    tag = "WORST_STOPPING"

    def __init__(self, tree, base: Base, start=0, end=None):
        super().__init__(tree, start, end)
        if base.tree is not tree:
            raise TreeMismatch("base lives on another tree")
        self.base = base
        self.coherent = base.coherent

    def node_value(self, X, node):
        return _snell_values(self.base, X, node, self.end)[node]


class TrivialProcess(UtilityProcess):
    """The unique functional on a one-point range: phi_{S,S}(X) = X_S."""

    tag = "TRIVIAL"
    coherent = True

    def __init__(self, tree, time: int):
        super().__init__(tree, time, time)

    def node_value(self, X, node):
        return X.values[node]


@dataclass(frozen=True)
class UtilityFunctional:
    """phi_{tau,theta}: a utility process conditioned at tau and restricted to [tau, theta]."""

    process: UtilityProcess
    tau: StoppingTime
    theta: StoppingTime

    def __call__(self, X: AdaptedProcess) -> ConditionalValue:
        return self.process.evaluate(X, self.tau, self.theta)

    @property
    def tree(self) -> FiltrationTree:
        return self.process.tree

    @property
    def tag(self) -> str:
        return self.process.tag

    @property
    def coherent(self) -> bool:
        return self.process.coherent


def condition_at(process: UtilityProcess, tau) -> UtilityFunctional:
    """The functional phi_{tau,end} obtained by stitching phi_{t,end} over {tau = t}."""
    return process.at(tau)


def _as_functional(F, tau=None) -> UtilityFunctional:
    if isinstance(F, UtilityFunctional):
        if tau is None:
            return F
        return F.process.at(tau, F.theta)
    return F.at(tau)


# ---------------------------------------------------------------- evaluators


def eval_robust(F, X: AdaptedProcess, tau=None) -> ConditionalValue:
    if isinstance(F, UtilityFunctional) and not isinstance(F.process, RobustProcess):
        raise TypeError("eval_robust needs a robust functional")
    return _as_functional(F, tau)(X)


def eval_entropic(P: Sequence, X: AdaptedProcess, t: int) -> ConditionalValue:
    return EntropicProcess(X.tree, P).values_at(X, t)


def eval_aggregated(P: Sequence, agg, X: AdaptedProcess, t: int, weights=None) -> ConditionalValue:
    return AggregatedProcess(X.tree, P, agg, weights).values_at(X, t)


def _snell_values(base: Base, X: AdaptedProcess, node: int, end: int) -> dict[int, object]:
    tree = base.tree
    order = [m for m in tree.subtree(node) if tree.times[m] <= end]
    S: dict[int, object] = {}
    for m in reversed(order):
        if tree.times[m] == end:
            S[m] = X.values[m]
        else:
            cont = base.psi(m, [(c, S[c]) for c in tree.children[m]])
            S[m] = min(X.values[m], cont)
    return S


@dataclass
class SnellResult:
    values: ConditionalValue
    S: AdaptedProcess
    xi: StoppingTime
    certified: bool


def snell_worst_stopping(base: Base | Sequence, X: AdaptedProcess, t: int = 0, end: int | None = None) -> SnellResult:
    """Backward recursion S_end = X_end, S_t = X_t ^ psi_t(S_{t+1}) and the first time S = X."""
    tree = X.tree
    if not isinstance(base, Base):
        base = LinearBase(tree, base)
    end = tree.horizon if end is None else end
    S: dict[int, object] = {}
    for n in tree.nodes_at(t):
        S.update(_snell_values(base, X, n, end))
    stops = []
    for n in tree.nodes_at(t):
        stack = [n]
        while stack:
            m = stack.pop()
            if S[m] == X.values[m] or tree.times[m] == end:
                stops.append(m)
            else:
                stack.extend(tree.children[m])
    # stop everywhere else at time t so xi is a global stopping time
    xi = StoppingTime(tree, stops)
    values = ConditionalValue(StoppingTime.constant(tree, t), {n: S[n] for n in tree.nodes_at(t)})
    certified = True
    for n in tree.nodes_at(t):
        direct = base.psi(n, [(s, X.values[s]) for s in xi.stops_under(n)])
        if not (ge_tol(direct, S[n]) and ge_tol(S[n], direct)):
            certified = False
    full = [S.get(m, ZERO) for m in range(len(tree))]
    S_proc = AdaptedProcess(tree, full, t, end)
    return SnellResult(values, S_proc, xi, certified)


# ---------------------------------------------------------------- acceptance


def accepts(F, X: AdaptedProcess, tol: float = DEFAULT_TOL) -> ConditionalValue:
    """Per tau-atom: is phi(X) >= 0?"""
    v = _as_functional(F)(X)
    return ConditionalValue(v.anchor, {n: ge_tol(x, 0, tol) for n, x in v.values.items()})


def recover_from_acceptance(F, X: AdaptedProcess, tau=None, iterations: int = 60) -> ConditionalValue:
    """sup{m : X - m 1_[tau,inf) accepted} per atom, by bisection on membership queries only."""
    F = _as_functional(F, tau)
    tau, theta = F.tau, F.theta
    norm = sup_norm(X, tau, theta)
    exact = X.is_exact()
    lo = {n: -(Fraction(v) if exact else float(v)) - 1 for n, v in norm.values.items()}
    hi = {n: -lo[n] for n in lo}

    def accepted_at(levels: Mapping[int, object]) -> dict[int, bool]:
        shifted = X.shift(ConditionalValue(tau, {n: -v for n, v in levels.items()}))
        return accepts(F, shifted, tol=0.0).values

    ok = accepted_at(lo)
    for _ in range(iterations):
        mid = {n: (lo[n] + hi[n]) / 2 for n in lo}
        res = accepted_at(mid)
        for n in lo:
            if res[n]:
                lo[n] = mid[n]
            else:
                hi[n] = mid[n]
    return ConditionalValue(tau, {n: (lo[n] + hi[n]) / 2 if ok[n] else NEG_INF for n in lo})


# ---------------------------------------------------------------- duality


def to_robust(process: UtilityProcess, closure_limit: int = 5000) -> RobustProcess | None:
    """An equivalent robust process with finitely many scenarios, when one is known."""
    tree = process.tree
    if isinstance(process, RobustProcess):
        return process
    if isinstance(process, AggregatedProcess) and process.agg is Aggregation.WEIGHTED and process.end == tree.horizon:
        scen = [build_density(tree, Mode.WEIGHTED, f, weights=process.weights) for f in process.base.densities]
        return RobustProcess(tree, scen, start=process.start, end=process.end)
    if isinstance(process, WorstStoppingProcess) and isinstance(process.base, LinearBase) and process.end == tree.horizon:
        dens = m_stable_closure(tree, process.base.densities, limit=closure_limit)
        seen: dict[tuple, DensityProcess] = {}
        for f in dens:
            for xi in enumerate_stopping_times(tree, 0):
                d = build_density(tree, Mode.STOPPED, f, xi=xi)
                seen.setdefault(d.increments, d)
        return RobustProcess(tree, [seen[k] for k in sorted(seen)], start=process.start, end=process.end)
    if isinstance(process, TrivialProcess):
        return RobustProcess(tree, [build_density(tree, Mode.STOPPED, [ONE] * len(tree.leaves), xi=process.end)],
                             start=process.start, end=process.end)
    return None


def penalty_sharp(F, a: DensityProcess, tau=None) -> ConditionalValue:
    """phi^#(a) = inf over accepted X of <X, a>, one exact LP per tau-atom; -inf when unbounded."""
    F = _as_functional(F, tau)
    robust = to_robust(F.process)
    if robust is None:
        raise TypeError(f"no finite robust representation for {F.tag}")
    tree = F.tree
    tau, theta = F.tau, F.theta
    out = {}
    for n in tau.stops:
        nodes = window_nodes(tree, n, theta)
        index = {m: k for k, m in enumerate(nodes)}

        def var(m: int) -> int:
            return index[m] if m in index else index[theta.stop_of(m)]

        obj = [tree.prob[m] * a.increments[m] / tree.prob[n] for m in nodes]
        if not any(obj):
            out[n] = ZERO
            continue
        lp = LinearProgram(obj)
        for _, w, g in robust.scenario_terms(n):
            row = [ZERO] * len(nodes)
            if w is None:
                row[index[n]] = ONE
            else:
                for m, c in w.items():
                    row[var(m)] += c
            lp.add(row, ">=", g)
        res = lp_solve(lp)
        if res.status is Status.UNBOUNDED:
            out[n] = NEG_INF
        elif res.status is Status.OPTIMAL:
            out[n] = res.value
        else:  # X = 0 is always feasible
            raise LPFailure(f"acceptance LP infeasible at {tree.ids[n]}")
    return ConditionalValue(tau, out)


def gamma_ext(gamma: Callable[[DensityProcess], ConditionalValue], a: DensityProcess, theta) -> ConditionalValue:
    """Extend a penalty on D_{theta,T} to D_{0,T}: mass times gamma of the normalized shift."""
    tree = a.tree
    theta = as_stopping_time(tree, theta)
    mass = a.mass(theta, None)
    g = gamma(normalize_from(a, theta))
    return ConditionalValue(theta, {n: mass.values[n] * g.values[n] if mass.values[n] > 0 else ZERO for n in theta.stops})


@dataclass
class RelevanceResult:
    relevant: bool
    witness: dict | None = None


def check_relevance(F, theta=None, grid: Iterable | None = None) -> RelevanceResult:
    """Does every loss -eps 1_A 1_[theta,inf) on a theta-atom A get a strictly negative value?"""
    F = _as_functional(F)
    tree = F.tree
    theta = F.theta if theta is None else as_stopping_time(tree, theta)
    if grid is None:
        grid = [ONE] if F.coherent else [Fraction(1, 2**k) for k in range(11)]
    for n in sorted(theta.stops):
        below = set(tree.subtree(n))
        for eps in grid:
            X = AdaptedProcess(tree, [-eps if m in below else ZERO for m in range(len(tree))], theta)
            v = F(X).at_node(n)
            if not v < 0:
                return RelevanceResult(False, {"atom": tree.ids[n], "eps": eps, "value": v})
    return RelevanceResult(True)


__all__ = [
    "AggregatedProcess",
    "Aggregation",
    "Base",
    "EntropicBase",
    "EntropicProcess",
    "LinearBase",
    "PenaltyFunction",
    "RelevanceResult",
    "RobustProcess",
    "SnellResult",
    "TrivialProcess",
    "UtilityFunctional",
    "UtilityProcess",
    "WorstStoppingProcess",
    "accepts",
    "check_relevance",
    "condition_at",
    "eval_aggregated",
    "eval_entropic",
    "eval_robust",
    "gamma_ext",
    "penalty_sharp",
    "recover_from_acceptance",
    "snell_worst_stopping",
    "to_robust",
]
