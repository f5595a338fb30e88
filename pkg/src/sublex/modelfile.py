"""JSON model and template documents.

A model file declares the product-space shape, the kernel family (one global
set, optionally overridden per node) and named variables, processes, events
and stopping times for the CLI to reference.  Kernel rows may be off by up to
1e-9 from summing to one; they are renormalized before the engine's stricter
construction.  Validation errors carry the offending field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .credal import CredalKernel, CredalModel, conditional_process
from .distribution import StepTemplate
from .errors import ModelFileError
from .martingale import CONVEX_BATTERY, partial_sum_process
from .tree import (AdaptedProcess, Event, RandomVariable, StoppingTime,
                   build_product_space)

MODEL_SCHEMA = "sublex-model/1"
TEMPLATE_SCHEMA = "sublex-template/1"
FILE_KERNEL_TOL = 1e-9

_CMP = {">=": np.greater_equal, "<=": np.less_equal, ">": np.greater,
        "<": np.less, "==": np.isclose}


@dataclass
class ParsedModel:
    name: str
    model: CredalModel
    template: StepTemplate | None
    variables: dict[str, RandomVariable] = field(default_factory=dict)
    processes: dict[str, AdaptedProcess] = field(default_factory=dict)
    events: dict[str, Event] = field(default_factory=dict)
    stopping_times: dict[str, StoppingTime] = field(default_factory=dict)
    steps: list[RandomVariable] = field(default_factory=list)

    def variable(self, name: str) -> RandomVariable:
        try:
            return self.variables[name]
        except KeyError:
            raise ModelFileError(f"undefined variable {name!r}", "variables")

    def process(self, name: str) -> AdaptedProcess:
        try:
            return self.processes[name]
        except KeyError:
            raise ModelFileError(f"undefined process {name!r}", "processes")

    def event(self, name: str) -> Event:
        try:
            return self.events[name]
        except KeyError:
            raise ModelFileError(f"undefined event {name!r}", "events")

    def stopping_time(self, name: str) -> StoppingTime:
        try:
            return self.stopping_times[name]
        except KeyError:
            raise ModelFileError(f"undefined stopping time {name!r}",
                                 "stopping_times")


def _need(doc: dict, key: str, kind, where: str):
    if key not in doc:
        raise ModelFileError(f"missing required field {key!r}", where)
    val = doc[key]
    if kind is float and isinstance(val, int):
        val = float(val)
    if not isinstance(val, kind):
        raise ModelFileError(f"field {key!r} has type {type(val).__name__}",
                             f"{where}.{key}")
    return val


def _kernel_rows(raw, arity: int, where: str) -> list[np.ndarray]:
    if not isinstance(raw, list) or not raw:
        raise ModelFileError("kernel set must be a nonempty list", where)
    rows = []
    for i, row in enumerate(raw):
        loc = f"{where}[{i}]"
        if not isinstance(row, list) or len(row) != arity:
            raise ModelFileError(f"kernel row needs {arity} entries", loc)
        vec = np.asarray(row, dtype=np.float64)
        if np.any(vec < 0):
            raise ModelFileError("negative probability", loc)
        s = float(vec.sum())
        if abs(s - 1.0) > FILE_KERNEL_TOL:
            raise ModelFileError(f"probabilities sum to {s!r}, not 1", loc)
        rows.append(vec / s)
    return rows


def _load(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ModelFileError(f"no such file: {path}")
    except json.JSONDecodeError as exc:
        raise ModelFileError(f"invalid JSON: {exc}", str(path))


def parse_template(path) -> StepTemplate:
    """Read a step template (or lift the global kernels of a model file)."""
    doc = _load(path)
    schema = doc.get("schema")
    if schema not in (TEMPLATE_SCHEMA, MODEL_SCHEMA):
        raise ModelFileError(f"unsupported schema {schema!r}", "schema")
    outcomes = _need(doc, "outcomes", list, "")
    kernels = _kernel_rows(_need(doc, "kernels", list, ""), len(outcomes),
                           "kernels")
    try:
        return StepTemplate(tuple(float(v) for v in outcomes),
                            tuple(tuple(k) for k in kernels))
    except (TypeError, ValueError) as exc:
        raise ModelFileError(str(exc), "outcomes")


def _build_variable(parsed: ParsedModel, name: str, spec, where: str) -> RandomVariable:
    space = parsed.model.space
    if not isinstance(spec, dict):
        raise ModelFileError("variable spec must be an object", where)
    if "step" in spec:
        i = spec["step"]
        if not isinstance(i, int) or not 1 <= i <= space.depth:
            raise ModelFileError(f"step must be in [1, {space.depth}]", where)
        return RandomVariable(space, space.step_outcomes(i))
    if "sum_of_steps" in spec and spec["sum_of_steps"]:
        total = np.zeros(space.n_leaves)
        for i in range(1, space.depth + 1):
            total += space.step_outcomes(i)
        return RandomVariable(space, total)
    if "constant" in spec:
        return RandomVariable.constant(space, float(spec["constant"]))
    if "leaf_values" in spec:
        vals = spec["leaf_values"]
        if not isinstance(vals, list) or len(vals) != space.n_leaves:
            raise ModelFileError(f"need {space.n_leaves} leaf values", where)
        return RandomVariable(space, vals)
    raise ModelFileError("unknown variable form (want step | sum_of_steps | "
                         "constant | leaf_values)", where)


def _build_process(parsed: ParsedModel, name: str, spec, where: str) -> AdaptedProcess:
    model = parsed.model
    space = model.space
    if not isinstance(spec, dict):
        raise ModelFileError("process spec must be an object", where)
    if "partial_sum" in spec:
        if not parsed.steps:
            raise ModelFileError("space has no step outcomes to sum", where)
        return partial_sum_process(model, parsed.steps)
    if "conditional_of" in spec:
        ref = spec["conditional_of"]
        if ref not in parsed.variables:
            raise ModelFileError(f"unresolved variable reference {ref!r}", where)
        return conditional_process(model, parsed.variables[ref])
    if "apply" in spec:
        sub = spec["apply"]
        ref = sub.get("process")
        fn = sub.get("fn")
        if ref not in parsed.processes:
            raise ModelFileError(f"unresolved process reference {ref!r}", where)
        if fn not in CONVEX_BATTERY:
            raise ModelFileError(
                f"unknown fn {fn!r}; registered: {sorted(CONVEX_BATTERY)}", where)
        return parsed.processes[ref].apply(CONVEX_BATTERY[fn])
    if "levels" in spec:
        start = int(spec.get("start", 0))
        try:
            return AdaptedProcess(space, start, spec["levels"])
        except ValueError as exc:
            raise ModelFileError(str(exc), where)
    raise ModelFileError("unknown process form (want partial_sum | "
                         "conditional_of | apply | levels)", where)


def _build_event(parsed: ParsedModel, name: str, spec, where: str) -> Event:
    space = parsed.model.space
    if not isinstance(spec, dict):
        raise ModelFileError("event spec must be an object", where)
    if "leaves" in spec:
        mask = np.zeros(space.n_leaves, dtype=bool)
        for i in spec["leaves"]:
            if not isinstance(i, int) or not 0 <= i < space.n_leaves:
                raise ModelFileError(f"leaf index {i} out of range", where)
            mask[i] = True
        return Event(space, mask)
    if "var_cmp" in spec:
        sub = spec["var_cmp"]
        ref = sub.get("var")
        if ref not in parsed.variables:
            raise ModelFileError(f"unresolved variable reference {ref!r}", where)
        op = sub.get("op")
        if op not in _CMP:
            raise ModelFileError(f"unknown comparison {op!r}", where)
        value = float(sub.get("value", 0.0))
        return Event(space, _CMP[op](parsed.variables[ref].values, value))
    raise ModelFileError("unknown event form (want leaves | var_cmp)", where)


def _build_stopping(parsed: ParsedModel, name: str, spec, where: str) -> StoppingTime:
    space = parsed.model.space
    if not isinstance(spec, dict):
        raise ModelFileError("stopping time spec must be an object", where)
    try:
        if "constant" in spec:
            return StoppingTime.constant(space, int(spec["constant"]))
        if "leaf_depths" in spec:
            return StoppingTime.from_leaf_depths(space, spec["leaf_depths"])
        if "first_time" in spec:
            sub = spec["first_time"]
            ref = sub.get("process")
            if ref not in parsed.processes:
                raise ModelFileError(f"unresolved process reference {ref!r}", where)
            return StoppingTime.first_hitting(
                parsed.processes[ref], float(sub.get("value", 0.0)),
                op=sub.get("op", ">="), cap=sub.get("cap"))
    except (ValueError, KeyError) as exc:
        raise ModelFileError(str(exc), where)
    raise ModelFileError("unknown stopping form (want constant | leaf_depths "
                         "| first_time)", where)


def parse_model(path) -> ParsedModel:
    doc = _load(path)
    if doc.get("schema") != MODEL_SCHEMA:
        raise ModelFileError(f"unsupported schema {doc.get('schema')!r}", "schema")
    depth = _need(doc, "depth", int, "")
    branching = _need(doc, "branching", int, "")
    outcomes = _need(doc, "outcomes", list, "")
    if len(outcomes) != branching:
        raise ModelFileError(f"need {branching} outcomes", "outcomes")
    try:
        space = build_product_space(depth, branching,
                                    [float(v) for v in outcomes])
    except (TypeError, ValueError) as exc:
        raise ModelFileError(str(exc), "outcomes")

    shared = _kernel_rows(_need(doc, "kernels", list, ""), branching, "kernels")
    overrides = {}
    for key, rows in doc.get("kernel_overrides", {}).items():
        loc = f"kernel_overrides.{key}"
        try:
            node = int(key)
        except ValueError:
            raise ModelFileError("node id must be an integer", loc)
        if not 0 <= node < space.leaf_offset:
            raise ModelFileError(f"node {node} is not an internal node", loc)
        overrides[node] = _kernel_rows(rows, int(space.child_counts[node]), loc)
    try:
        kernel = CredalKernel(space, shared=shared, overrides=overrides)
    except ValueError as exc:
        raise ModelFileError(str(exc), "kernels")

    template = None
    if not overrides:
        template = StepTemplate(tuple(float(v) for v in outcomes),
                                tuple(tuple(float(p) for p in k) for k in shared))

    parsed = ParsedModel(
        name=str(doc.get("name", "")),
        model=CredalModel(space, kernel),
        template=template,
    )
    parsed.steps = [RandomVariable(space, space.step_outcomes(i))
                    for i in range(1, depth + 1)]
    for i, x in enumerate(parsed.steps, start=1):
        parsed.variables[f"X{i}"] = x

    for section, builder, store in (
        ("variables", _build_variable, parsed.variables),
        ("processes", _build_process, parsed.processes),
        ("events", _build_event, parsed.events),
        ("stopping_times", _build_stopping, parsed.stopping_times),
    ):
        raw = doc.get(section, {})
        if not isinstance(raw, dict):
            raise ModelFileError("section must be an object", section)
        for name, spec in raw.items():
            where = f"{section}.{name}"
            if name in store:
                raise ModelFileError(f"name {name!r} already defined", where)
            store[name] = builder(parsed, name, spec, where)
    return parsed


def model_document(name: str, depth: int, branching: int, outcomes, kernels,
                   **sections) -> dict:
    doc = {
        "schema": MODEL_SCHEMA,
        "name": name,
        "depth": depth,
        "branching": branching,
        "outcomes": [float(v) for v in outcomes],
        "kernels": [[float(p) for p in row] for row in kernels],
    }
    doc.update(sections)
    return doc


def write_model(doc: dict, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
