"""JSON fixtures: trees, processes, densities, scenario sets and functionals."""
from __future__ import annotations

import json
import math
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .composition import Mode, ScenarioSet, build_density
from .errors import DynariskError, FixtureParseError
from .filtration import ConditionalValue, FiltrationTree, StoppingTime, build_tree
from .functionals import (
    AggregatedProcess,
    EntropicBase,
    EntropicProcess,
    LinearBase,
    PenaltyFunction,
    RobustProcess,
    UtilityProcess,
    WorstStoppingProcess,
)
from .processes import AdaptedProcess, DensityProcess

BUNDLED_TREES = {"PAPER53": "paper53.json"}


def bundled_path(name: str) -> Path:
    return Path(str(resources.files("dynarisk") / "data" / name))


def read_json(path: str | Path) -> Any:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"fixture not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise FixtureParseError(f"{path}: {exc}") from exc


def load_tree(ref: str | Mapping, base_dir: Path | None = None) -> FiltrationTree:
    """A tree from an inline description, a bundled name, or a path."""
    if isinstance(ref, Mapping):
        return _parse(build_tree, ref)
    if ref in BUNDLED_TREES:
        return _parse(build_tree, read_json(bundled_path(BUNDLED_TREES[ref])))
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return _parse(build_tree, read_json(path))


def _parse(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except FixtureParseError:
        raise
    except (DynariskError, KeyError, TypeError, ValueError, ZeroDivisionError) as exc:
        raise FixtureParseError(f"{type(exc).__name__}: {exc}") from exc


def _stopping_time(tree: FiltrationTree, value) -> StoppingTime | int | None:
    if value is None or isinstance(value, int):
        return value
    return StoppingTime(tree, value)


def process_from_json(tree: FiltrationTree, doc: Mapping) -> AdaptedProcess:
    window = doc.get("window") or [None, None]
    return AdaptedProcess(tree, doc["values"], _stopping_time(tree, window[0]), _stopping_time(tree, window[1]))


def density_from_json(tree: FiltrationTree, doc: Mapping) -> DensityProcess:
    if "increments" in doc:
        return DensityProcess(tree, doc["increments"])
    mode = Mode(str(doc["mode"]).upper())
    return build_density(tree, mode, doc["f"], xi=_stopping_time(tree, doc.get("xi")), weights=doc.get("weights"))


def scenario_set_from_json(tree: FiltrationTree, doc: Mapping) -> ScenarioSet:
    window = doc.get("window") or [None, None]
    dens = [density_from_json(tree, d) for d in doc["densities"]]
    return ScenarioSet(dens, _stopping_time(tree, window[0]), _stopping_time(tree, window[1]))


def functional_from_json(tree: FiltrationTree, doc: Mapping) -> UtilityProcess:
    tag = str(doc["tag"]).upper()
    start, end = doc.get("window") or [0, None]
    if tag == "ROBUST":
        scen = [density_from_json(tree, d) for d in doc["scenarios"]]
        penalty = PenaltyFunction(tree, doc["penalty"]) if doc.get("penalty") is not None else None
        return RobustProcess(tree, scen, penalty, start, end)
    if tag == "ENTROPIC":
        return EntropicProcess(tree, doc["densities"], start, end)
    if tag == "AGGREGATED":
        return AggregatedProcess(tree, doc["densities"], doc["agg"], doc.get("weights"), start, end)
    if tag == "WORST_STOPPING":
        kind = str(doc.get("base", "linear")).lower()
        base = EntropicBase(tree, doc["densities"]) if kind == "entropic" else LinearBase(tree, doc["densities"])
        return WorstStoppingProcess(tree, base, start, end)
    raise FixtureParseError(f"unknown functional tag {tag!r}")


def load_document(path: str | Path) -> tuple[FiltrationTree, Mapping]:
    doc = read_json(path)
    if not isinstance(doc, Mapping) or "tree" not in doc:
        raise FixtureParseError(f"{path}: fixture must be an object with a 'tree' field")
    return load_tree(doc["tree"], Path(path).parent), doc


def load_process(path, tree: FiltrationTree | None = None) -> AdaptedProcess:
    t, doc = load_document(path)
    return _parse(process_from_json, tree or t, doc)


def load_density(path, tree: FiltrationTree | None = None) -> DensityProcess:
    t, doc = load_document(path)
    return _parse(density_from_json, tree or t, doc)


def load_functional(path, tree: FiltrationTree | None = None) -> UtilityProcess:
    t, doc = load_document(path)
    return _parse(functional_from_json, tree or t, doc)


def load_scenario_set(path, tree: FiltrationTree | None = None) -> ScenarioSet:
    t, doc = load_document(path)
    return _parse(scenario_set_from_json, tree or t, doc)


# ---------------------------------------------------------------- output


def encode(value: Any) -> Any:
    """JSON-ready form: rationals as "p/q", infinities as "inf"/"-inf", floats as shortest repr."""
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return value
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, ConditionalValue):
        return {k: encode(v) for k, v in value.by_id().items()}
    if isinstance(value, AdaptedProcess):
        return {k: encode(v) for k, v in value.by_id().items()}
    if isinstance(value, DensityProcess):
        return {k: encode(v) for k, v in value.by_id().items()}
    if isinstance(value, StoppingTime):
        return sorted(value.tree.ids[s] for s in value.stops)
    if isinstance(value, Mapping):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [encode(v) for v in value]
    return str(value)


def dumps(value: Any) -> str:
    return json.dumps(encode(value), sort_keys=True, indent=2)


def process_to_json(X: AdaptedProcess, tree_ref: str | Mapping) -> dict:
    return {"tree": tree_ref, "values": encode(X)}


def paper53_tree() -> FiltrationTree:
    return load_tree("PAPER53")


def paper53_process(tree: FiltrationTree | None = None) -> AdaptedProcess:
    return load_process(bundled_path("paper53_process.json"), tree)
