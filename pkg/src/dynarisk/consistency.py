"""Time-consistency checks, certificates and refutations for utility processes."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Sequence

from .composition import ScenarioSet, check_m_stability, check_stability, concat
from .errors import HorizonMismatch, InputNotConsistent, NotAccepted
from .filtration import (
    DEFAULT_ENUMERATION_CAP,
    ConditionalValue,
    StoppingTime,
    as_stopping_time,
    condition_value,
    enumerate_stopping_times,
    values_close,
)
from .functionals import (
    AggregatedProcess,
    Aggregation,
    Base,
    EntropicProcess,
    LinearBase,
    RobustProcess,
    TrivialProcess,
    UtilityProcess,
    WorstStoppingProcess,
    accepts,
    penalty_sharp,
)
from .generators import battery as make_battery
from .processes import AdaptedProcess, DensityProcess, classify_density, Classification

DEFAULT_TOL = 1e-9


class Verdict(enum.Enum):
    CERTIFIED = "CERTIFIED"
    REFUTED = "REFUTED"
    UNKNOWN = "UNKNOWN"


class Mode(enum.Enum):
    ONE_STEP = "ONE_STEP"
    ALL_STOPPING_TIMES = "ALL_STOPPING_TIMES"


@dataclass
class ConsistencyReport:
    verdict: Verdict
    method: str
    scope: str = "battery"
    witnesses: list[dict] = field(default_factory=list)
    certificate: str = ""
    checked: int = 0
    details: dict = field(default_factory=dict)

    @property
    def refuted(self) -> bool:
        return self.verdict is Verdict.REFUTED

    def label(self) -> str:
        if self.verdict is Verdict.CERTIFIED and self.scope != "theorem":
            return f"CERTIFIED-on-{self.scope}"
        return self.verdict.value

    def to_dict(self) -> dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "label": self.label(),
            "method": self.method,
            "scope": self.scope,
            "certificate": self.certificate,
            "checked": self.checked,
            "witnesses": self.witnesses,
            "details": self.details,
        }


def node_values(process: UtilityProcess, X: AdaptedProcess) -> dict[int, Any]:
    """phi_{t,end}(X) on every atom n at a time t in the process range."""
    tree = process.tree
    return {m: process.node_value(X, m) for m in range(len(tree)) if process.start <= tree.times[m] <= process.end}


def continuation(X: AdaptedProcess, theta: StoppingTime, vals: dict[int, Any], tau=None) -> AdaptedProcess:
    """X 1_[tau, theta) + phi_theta(X) 1_[theta, inf), with phi_theta read from ``vals``."""
    tree = X.tree
    out = []
    for m in range(len(tree)):
        s = theta.stop_of(m)
        out.append(X.values[m] if s is None else vals[s])
    return AdaptedProcess(tree, out, tau)


def _compare(lhs: ConditionalValue, rhs: ConditionalValue, tol: float):
    for n in sorted(lhs.values):
        if not values_close(lhs.values[n], rhs.values[n], tol):
            return n
    return None


def _stopping_times_in(process: UtilityProcess, t: int, cap: int) -> list[StoppingTime]:
    tree = process.tree
    return [th for th in enumerate_stopping_times(tree, t, cap) if all(tree.times[s] <= process.end for s in th.stops)]


def check_time_consistency(
    process: UtilityProcess,
    battery: Sequence[AdaptedProcess],
    mode: Mode | str = Mode.ONE_STEP,
    tol: float = DEFAULT_TOL,
    max_witnesses: int = 1,
    cap: int = DEFAULT_ENUMERATION_CAP,
) -> ConsistencyReport:
    """Test phi_t(X) = phi_t(X 1_[t,theta) + phi_theta(X) 1_[theta,inf)) on a battery."""
    mode = Mode(mode.upper().replace("-", "_")) if isinstance(mode, str) else mode
    if mode is Mode.ALL_STOPPING_TIMES:
        times = {t: _stopping_times_in(process, t, cap) for t in range(process.start, process.end + 1)}
    else:
        tree = process.tree
        times = {t: [StoppingTime.constant(tree, t + 1)] for t in range(process.start, process.end)}
    witnesses: list[dict] = []
    checked = 0
    for k, X in enumerate(battery):
        vals = node_values(process, X)
        for t, thetas in times.items():
            lhs = ConditionalValue(StoppingTime.constant(process.tree, t), {n: vals[n] for n in process.tree.nodes_at(t)})
            for theta in thetas:
                checked += 1
                Y = continuation(X, theta, vals)
                rhs = process.evaluate(Y, t)
                bad = _compare(lhs, rhs, tol)
                if bad is not None:
                    witnesses.append(
                        {
                            "battery_index": k,
                            "X": X,
                            "t": t,
                            "theta": theta,
                            "atom": process.tree.ids[bad],
                            "lhs": lhs.values[bad],
                            "rhs": rhs.values[bad],
                        }
                    )
                    if len(witnesses) >= max_witnesses:
                        return ConsistencyReport(Verdict.REFUTED, mode.value, "battery", witnesses, checked=checked)
    if witnesses:
        return ConsistencyReport(Verdict.REFUTED, mode.value, "battery", witnesses, checked=checked)
    return ConsistencyReport(
        Verdict.CERTIFIED,
        mode.value,
        "battery",
        certificate=f"identity held on {len(battery)} processes",
        checked=checked,
    )


@dataclass
class Decomposition:
    Y: AdaptedProcess
    Z: AdaptedProcess
    y_accepted: ConditionalValue
    z_accepted: ConditionalValue

    @property
    def ok(self) -> bool:
        return all(self.y_accepted.values.values()) and all(self.z_accepted.values.values())


def decompose_acceptance(process: UtilityProcess, X: AdaptedProcess, tau=None, theta=None) -> Decomposition:
    """Split an accepted X into Y in C_{tau,theta} and Z in C_{theta,end}, as in the decomposition identity."""
    tree = process.tree
    tau = as_stopping_time(tree, tau, process.start)
    theta = as_stopping_time(tree, theta, process.end)
    if not all(accepts(process.at(tau), X).values.values()):
        raise NotAccepted("X is not accepted at tau")
    phi_theta = process.evaluate(X, theta)
    Y = continuation(X, theta, phi_theta.values, tau)
    Z = AdaptedProcess(tree, [x - y for x, y in zip(X.values, Y.values)], theta)
    return Decomposition(Y, Z, accepts(process.at(tau, theta), Y), accepts(process.at(theta), Z))


class ExtendedProcess(UtilityProcess):
    """The pasting of a process on [start, S] with a process on [S, end]."""

    tag = "EXTENDED"

    def __init__(self, early: UtilityProcess, late: UtilityProcess):
        if early.tree is not late.tree:
            raise HorizonMismatch("processes live on different trees")
        if early.end != late.start:
            raise HorizonMismatch(f"early process ends at {early.end}, late one starts at {late.start}")
        super().__init__(early.tree, early.start, late.end)
        self.early = early
        self.late = late
        self.split = late.start
        self.coherent = early.coherent and late.coherent

    def node_value(self, X, node):
        tree = self.tree
        if tree.times[node] >= self.split:
            return self.late.node_value(X, node)
        S = StoppingTime.constant(tree, self.split)
        vals = {s: self.late.node_value(X, s) for s in S.stops_under(node)}
        out = list(X.values)
        for m in tree.subtree(node):
            s = S.stop_of(m)
            if s is not None:
                out[m] = vals[s]
        return self.early.node_value(AdaptedProcess(tree, out), node)


def extend_process(
    early: UtilityProcess,
    late: UtilityProcess,
    battery: Sequence[AdaptedProcess] | None = None,
    verify: bool = True,
    tol: float = DEFAULT_TOL,
) -> ExtendedProcess:
    """Paste two time-consistent processes; inputs are checked on a battery first."""
    ext = ExtendedProcess(early, late)
    if verify:
        if battery is None:
            battery = make_battery(early.tree, 20, seed=0)
        for part in (early, late):
            report = check_time_consistency(part, battery, Mode.ONE_STEP, tol)
            if report.refuted:
                raise InputNotConsistent(f"{part.tag} process on [{part.start}, {part.end}] is not time-consistent")
    return ext


def check_penalty_recursion(
    process: UtilityProcess,
    a: DensityProcess,
    tau,
    theta,
    candidates: ScenarioSet | Sequence[DensityProcess],
) -> ConsistencyReport:
    """Compare phi#_tau(a) with max_b phi#_tau(a (+)^theta b) + E[phi#_theta(a) | F_tau].

    The left side can never be smaller for a time-consistent process, so a
    smaller left side refutes. Equality only shows the candidates attain the sup.
    """
    tree = process.tree
    tau = as_stopping_time(tree, tau)
    theta = as_stopping_time(tree, theta)
    cands = list(candidates.densities if isinstance(candidates, ScenarioSet) else candidates)
    lhs = penalty_sharp(process.at(tau), a)
    tail = condition_value(penalty_sharp(process.at(theta), a), tau)
    best: dict[int, Any] = {}
    for b in cands:
        head = penalty_sharp(process.at(tau), concat(a, b, theta, theta.stops))
        for n, v in head.values.items():
            total = v + tail.values[n]  # -inf absorbs finite values
            if n not in best or total > best[n]:
                best[n] = total
    rhs = ConditionalValue(tau, best)
    status = {}
    witnesses = []
    for n in sorted(lhs.values):
        l, r = lhs.values[n], rhs.values[n]
        if l == r:
            status[tree.ids[n]] = "="
        elif l > r:
            status[tree.ids[n]] = ">"
        else:
            status[tree.ids[n]] = "<"
            witnesses.append({"atom": tree.ids[n], "lhs": l, "rhs": r, "tau": tau, "theta": theta})
    details = {"lhs": lhs, "rhs": rhs, "status": status}
    if witnesses:
        return ConsistencyReport(Verdict.REFUTED, "penalty-recursion", "theorem", witnesses, checked=len(cands), details=details)
    if all(s == "=" for s in status.values()):
        return ConsistencyReport(
            Verdict.CERTIFIED,
            "penalty-recursion",
            "candidates",
            certificate="recursion attained by the candidate set",
            checked=len(cands),
            details=details,
        )
    return ConsistencyReport(Verdict.UNKNOWN, "penalty-recursion", "candidates", checked=len(cands), details=details)


def check_base_tc(base: Base, Ys: Sequence[dict[int, Any]], tol: float = 1e-10) -> tuple[bool, dict | None]:
    """psi_t(psi_{t+1}(Y)) = psi_t(Y) for leaf payoffs Y and every non-terminal node."""
    tree = base.tree
    for k, Y in enumerate(Ys):
        for n in range(len(tree)):
            if tree.is_leaf(n):
                continue
            leaves = [(l, Y[l]) for l in tree.leaves_under(n)]
            direct = base.psi(n, leaves)
            inner = [(c, base.psi(c, [(l, Y[l]) for l in tree.leaves_under(c)])) for c in tree.children[n]]
            nested = base.psi(n, inner)
            if not values_close(direct, nested, tol):
                return False, {"payoff": k, "atom": tree.ids[n], "direct": direct, "nested": nested}
    return True, None


def _strictly_positive(densities) -> bool:
    return all(v > 0 for f in densities for v in f.values())


def certify_sufficiency(
    process: UtilityProcess,
    battery: Sequence[AdaptedProcess] | None = None,
    seed: int = 0,
    fallback: bool = True,
) -> ConsistencyReport:
    """Try a theorem-backed certificate; otherwise fall back to the definition sweep."""
    tree = process.tree
    full_range = process.start == 0 and process.end == tree.horizon
    certificate, reason = None, ""
    details: dict[str, Any] = {}

    if isinstance(process, TrivialProcess):
        certificate = "a one-point time range is trivially time-consistent"
    elif isinstance(process, RobustProcess) and process.coherent and full_range:
        stab = check_stability(ScenarioSet(list(process.scenarios)), use_hull=True, seed=seed)
        de = all(classify_density(b) is Classification.IN_D_E for b in process.scenarios)
        details["stability"] = stab.summary
        details["all_in_D_e"] = de
        if stab.stable and de:
            certificate = "coherent sufficiency: scenario set in D^e and stable under concatenation"
            if not stab.complete:
                certificate += " (certified up to cap)"
        else:
            reason = "scenario set not certified stable in D^e"
    elif isinstance(process, EntropicProcess) and full_range:
        stab = check_m_stability(tree, process.base.densities, seed=seed)
        details["m_stability"] = stab.summary
        if stab.stable:
            certificate = "entropic one-step identity: density set is m-stable"
        else:
            reason = "density set not m-stable"
    elif isinstance(process, AggregatedProcess) and process.agg is Aggregation.WEIGHTED and full_range:
        stab = check_m_stability(tree, process.base.densities, seed=seed)
        pos = _strictly_positive(process.base.densities)
        details["m_stability"] = stab.summary
        if stab.stable and pos:
            certificate = "weighted average: m-stable positive densities map to a stable set in D^e"
        else:
            reason = "density set not m-stable or not strictly positive"
    elif isinstance(process, AggregatedProcess):
        reason = "m-stability does not suffice for infimum-over-time aggregation"
    elif isinstance(process, WorstStoppingProcess):
        if isinstance(process.base, LinearBase):
            stab = check_m_stability(tree, process.base.densities, seed=seed)
            details["m_stability"] = stab.summary
            if stab.stable:
                certificate = "worst stopping over an m-stable base"
        if certificate is None:
            rng_battery = battery if battery is not None else make_battery(tree, 100, seed)
            ok, witness = check_base_tc(process.base, [X.leaf_values() for X in rng_battery])
            details["base_tc"] = ok
            if ok:
                return ConsistencyReport(
                    Verdict.CERTIFIED,
                    "certificate",
                    "battery",
                    certificate="Snell recursion over a base with the one-step identity on the battery",
                    checked=len(rng_battery),
                    details=details,
                )
            details["base_tc_witness"] = witness
            reason = "base fails the one-step identity"
    else:
        reason = f"no certificate available for {process.tag}"

    if certificate is not None:
        return ConsistencyReport(Verdict.CERTIFIED, "certificate", "theorem", certificate=certificate, details=details)
    details["certificate"] = "UNKNOWN"
    details["reason"] = reason
    if not fallback:
        return ConsistencyReport(Verdict.UNKNOWN, "certificate", "none", details=details)
    if battery is None:
        battery = make_battery(tree, 100, seed)
    report = check_time_consistency(process, battery, Mode.ALL_STOPPING_TIMES)
    report.method = "certificate+sweep"
    report.details.update(details)
    if report.verdict is Verdict.CERTIFIED:
        report.certificate = "no certificate; " + report.certificate
    return report


__all__ = [
    "ConsistencyReport",
    "Decomposition",
    "ExtendedProcess",
    "Mode",
    "Verdict",
    "certify_sufficiency",
    "check_base_tc",
    "check_penalty_recursion",
    "check_time_consistency",
    "continuation",
    "decompose_acceptance",
    "extend_process",
    "node_values",
]
