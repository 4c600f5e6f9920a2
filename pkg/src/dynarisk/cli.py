"""Command-line interface: ``dynarisk <command> ...``.

Exit status: 0 when values were computed or a check passed, 1 when a
consistency check refuted, 2 on usage errors and unreadable fixtures.
"""
from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Sequence

from .composition import Mode as DensityMode, build_density, concat, m_stable_closure, paste_density
from .consistency import Mode, Verdict, certify_sufficiency, check_base_tc, check_time_consistency
from .errors import DynariskError, FixtureParseError, UsageError
from .filtration import StoppingTime, enumerate_stopping_times
from .fixtures import (
    bundled_path,
    encode,
    dumps,
    load_density,
    load_functional,
    load_process,
    paper53_process,
    paper53_tree,
)
from .functionals import (
    AggregatedProcess,
    EntropicProcess,
    LinearBase,
    WorstStoppingProcess,
    penalty_sharp,
    snell_worst_stopping,
)
from .generators import battery as make_battery
from .processes import AdaptedProcess, pairing

EXIT_OK = 0
EXIT_REFUTED = 1
EXIT_USAGE = 2


@dataclass
class CommandRequest:
    command: str
    fixtures: dict[str, str] = field(default_factory=dict)
    seed: int = 0
    tol: float = 1e-9
    fmt: str = "json"
    options: dict[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        if self.tol <= 0:
            raise UsageError("tolerance must be positive")
        for role, path in self.fixtures.items():
            if path is not None and not Path(path).is_file():
                raise UsageError(f"{role} fixture not found: {path}")


@dataclass
class Outcome:
    status: int
    report: dict[str, Any]


def _table(report: dict[str, Any], indent: str = "") -> str:
    lines = []
    for key in sorted(report):
        value = report[key]
        if isinstance(value, dict):
            lines.append(f"{indent}{key}:")
            lines.append(_table(value, indent + "  "))
        elif isinstance(value, list) and value and isinstance(value[0], dict):
            lines.append(f"{indent}{key}:")
            for i, item in enumerate(value):
                lines.append(f"{indent}  [{i}]")
                lines.append(_table(item, indent + "    "))
        else:
            lines.append(f"{indent}{key:<12} {value}")
    return "\n".join(lines)


def _verdict_status(verdict: Verdict) -> int:
    return EXIT_REFUTED if verdict is Verdict.REFUTED else EXIT_OK


def _cmd_eval(req: CommandRequest) -> Outcome:
    proc = load_functional(req.fixtures["functional"])
    X = load_process(req.fixtures["process"], proc.tree)
    t = req.options.get("time")
    value = proc.evaluate(X, proc.start if t is None else t)
    return Outcome(EXIT_OK, {"command": "eval", "tag": proc.tag, "time": value.anchor, "value": value})


def _battery(req: CommandRequest, tree):
    extra = [load_process(p, tree) for p in req.options.get("battery") or []]
    return make_battery(tree, req.options.get("n", 100), req.seed, extra)


def _cmd_check(req: CommandRequest) -> Outcome:
    proc = load_functional(req.fixtures["process"])
    mode = Mode.ONE_STEP if req.options.get("mode", "one-step") == "one-step" else Mode.ALL_STOPPING_TIMES
    report = check_time_consistency(proc, _battery(req, proc.tree), mode, req.tol)
    out = {"command": "check", "tag": proc.tag, "seed": req.seed, **report.to_dict()}
    return Outcome(_verdict_status(report.verdict), out)


def _cmd_certify(req: CommandRequest) -> Outcome:
    proc = load_functional(req.fixtures["process"])
    report = certify_sufficiency(proc, _battery(req, proc.tree), seed=req.seed)
    out = {"command": "certify", "tag": proc.tag, "seed": req.seed, **report.to_dict()}
    return Outcome(_verdict_status(report.verdict), out)


def _cmd_penalty(req: CommandRequest) -> Outcome:
    proc = load_functional(req.fixtures["functional"])
    a = load_density(req.fixtures["scenario"], proc.tree)
    t = req.options.get("time")
    value = penalty_sharp(proc.at(proc.start if t is None else t), a)
    return Outcome(EXIT_OK, {"command": "penalty", "tag": proc.tag, "value": value})


def _cmd_snell(req: CommandRequest) -> Outcome:
    proc = load_functional(req.fixtures["functional"])
    X = load_process(req.fixtures["process"], proc.tree)
    if isinstance(proc, WorstStoppingProcess):
        base = proc.base
    elif isinstance(proc, (AggregatedProcess, EntropicProcess)):
        base = proc.base
    else:
        raise UsageError("snell needs a functional with a one-step base (WORST_STOPPING, AGGREGATED or ENTROPIC)")
    t = req.options.get("time") or 0
    res = snell_worst_stopping(base, X, t)
    return Outcome(
        EXIT_OK,
        {"command": "snell", "value": res.values, "S": res.S, "xi": res.xi, "certified": res.certified},
    )


def demo_counterexample() -> Outcome:
    tree = paper53_tree()
    X = paper53_process(tree)
    proc = load_functional(bundled_path("paper53_inf_time.json"), tree)
    phi0 = proc.evaluate(X, 0)
    phi1 = proc.evaluate(X, 1)
    Y = AdaptedProcess(tree, [X.values[m] if tree.times[m] == 0 else phi1.at_node(m) for m in range(len(tree))])
    pasted = proc.evaluate(Y, 0)
    report = check_time_consistency(proc, [X], Mode.ALL_STOPPING_TIMES)
    out = {
        "command": "demo counterexample",
        "phi_0": phi0,
        "phi_1": phi1,
        "phi_0_of_pasted": pasted,
        **report.to_dict(),
    }
    return Outcome(_verdict_status(report.verdict), out)


def demo_worst_stopping() -> Outcome:
    tree = paper53_tree()
    X = paper53_process(tree)
    base = LinearBase(tree, [[1] * len(tree.leaves)])
    res = snell_worst_stopping(base, X, 0)
    ones = [Fraction(1)] * len(tree.leaves)
    means = {
        "/".join(sorted(tree.ids[s] for s in xi.stops)): pairing(X, build_density(tree, DensityMode.STOPPED, ones, xi=xi)).values[tree.root]
        for xi in enumerate_stopping_times(tree)
    }
    return Outcome(
        EXIT_OK,
        {
            "command": "demo worst-stopping",
            "value": res.values,
            "S": res.S,
            "xi": res.xi,
            "certified": res.certified,
            "brute_force_min": min(means.values()),
            "stopping_time_means": means,
        },
    )


def demo_entropic() -> Outcome:
    tree = paper53_tree()
    X = paper53_process(tree)
    gens = [[1, 1, 1, 1], [Fraction(1, 2), Fraction(3, 2), Fraction(1, 2), Fraction(3, 2)]]
    P = m_stable_closure(tree, gens)
    proc = EntropicProcess(tree, P)
    ok, witness = check_base_tc(proc.base, [Y.leaf_values() for Y in make_battery(tree, 50, 0)])
    report = check_time_consistency(proc, make_battery(tree, 50, 0), Mode.ONE_STEP)
    return Outcome(
        _verdict_status(report.verdict),
        {
            "command": "demo entropic",
            "densities": len(P),
            "phi_0": proc.evaluate(X, 0),
            "phi_1": proc.evaluate(X, 1),
            "one_step_identity": ok,
            **report.to_dict(),
        },
    )


def demo_weighted() -> Outcome:
    tree = paper53_tree()
    X = paper53_process(tree)
    proc = load_functional(bundled_path("paper53_weighted.json"), tree)
    f = {l: Fraction(1) for l in tree.leaves}
    g = dict(zip(tree.leaves, [Fraction(2), Fraction(0), Fraction(1), Fraction(1)]))
    theta = StoppingTime.constant(tree, 1)
    A = [tree.node("w12")]
    lhs = concat(build_density(tree, DensityMode.WEIGHTED, f, weights=proc.weights),
                 build_density(tree, DensityMode.WEIGHTED, g, weights=proc.weights), theta, A)
    rhs = build_density(tree, DensityMode.WEIGHTED, paste_density(tree, f, g, theta, A), weights=proc.weights)
    report = certify_sufficiency(proc)
    return Outcome(
        _verdict_status(report.verdict),
        {
            "command": "demo weighted",
            "phi_0": proc.evaluate(X, 0),
            "phi_1": proc.evaluate(X, 1),
            "homomorphism_holds": lhs == rhs,
            **report.to_dict(),
        },
    )


DEMOS = {
    "counterexample": demo_counterexample,
    "worst-stopping": demo_worst_stopping,
    "entropic": demo_entropic,
    "weighted": demo_weighted,
}


def run_command(req: CommandRequest) -> Outcome:
    req.validate()
    if req.command == "demo":
        return DEMOS[req.options["name"]]()
    handlers = {
        "eval": _cmd_eval,
        "check": _cmd_check,
        "certify": _cmd_certify,
        "penalty": _cmd_penalty,
        "snell": _cmd_snell,
    }
    return handlers[req.command](req)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dynarisk", description="Dynamic utility functionals on finite trees.")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=["json", "table"], default="json")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--tol", type=float, default=1e-9)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate a functional on a process")
    p.add_argument("--functional", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--time", type=int)

    for name, text in (("check", "test time-consistency on a battery"), ("certify", "certify time-consistency")):
        p = sub.add_parser(name, parents=[common], help=text)
        p.add_argument("--process", required=True, help="utility process (functional fixture)")
        p.add_argument("--battery", action="append", help="extra process fixture for the battery")
        p.add_argument("--n", type=int, default=100, help="number of random battery processes")
        if name == "check":
            p.add_argument("--mode", choices=["one-step", "sweep"], default="one-step")

    p = sub.add_parser("penalty", parents=[common], help="sharp penalty of a density")
    p.add_argument("--functional", required=True)
    p.add_argument("--scenario", required=True)
    p.add_argument("--time", type=int)

    p = sub.add_parser("snell", parents=[common], help="worst-stopping value by backward recursion")
    p.add_argument("--functional", required=True)
    p.add_argument("--process", required=True)
    p.add_argument("--time", type=int, default=0)

    p = sub.add_parser("demo", parents=[common], help="bundled demonstrations")
    p.add_argument("name", choices=sorted(DEMOS))
    return parser


def request_from_args(args: argparse.Namespace) -> CommandRequest:
    seed = args.seed
    env = os.environ.get("DYNARISK_SEED")
    if env is not None:
        try:
            seed = int(env)
        except ValueError as exc:
            raise UsageError(f"DYNARISK_SEED must be an integer, got {env!r}") from exc
    fixtures = {k: getattr(args, k) for k in ("functional", "process", "scenario") if getattr(args, k, None) is not None}
    options = {k: getattr(args, k) for k in ("time", "mode", "battery", "n", "name") if hasattr(args, k)}
    return CommandRequest(args.command, fixtures, seed, args.tol, args.format, options)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        req = request_from_args(args)
        outcome = run_command(req)
    except (UsageError, FixtureParseError, FileNotFoundError) as exc:
        print(f"dynarisk: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DynariskError as exc:
        print(f"dynarisk: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if req.fmt == "json":
        print(dumps(outcome.report))
    else:
        print(_table(encode(outcome.report)))
    return outcome.status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
