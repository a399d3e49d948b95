"""JSON documents for workloads, task graphs, scenarios and auctions; CSV for metrics.

Infinite targets are written as ``null``. Floats are written with 12
significant digits.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import jsonschema
import numpy as np

from .auction import Bid
from .core import (
    CompletionHistogram,
    Configuration,
    Contract,
    DemandCurve,
    IntervalStats,
    PiecewiseUtility,
    PriceSchedule,
)
from .simulator import AGENT_KINDS, AgentModel, Scenario, Task, generate_synthetic_workload
from .taskgraph import Option, TaskGraph

DIGITS = 12


class FormatError(ValueError):
    """A document failed to parse or validate; the message says where."""


# ---------------------------------------------------------------- schemas

_NUM = {"type": "number"}
_NONNEG = {"type": "number", "minimum": 0}
_NUMS = {"type": "array", "items": _NUM}
_TARGETS = {"type": "array", "minItems": 2, "items": {"type": ["number", "null"]}}

_HISTOGRAM = {
    "type": "object",
    "oneOf": [
        {"required": ["lo", "hi", "masses"]},
        {"required": ["edges", "masses"]},
        {"required": ["times", "masses"]},
        {"required": ["gaussian"]},
    ],
    "properties": {
        "lo": _NUMS, "hi": _NUMS, "edges": _NUMS, "times": _NUMS, "masses": _NUMS,
        "gaussian": {
            "type": "object", "required": ["mean", "std"],
            "properties": {"mean": _NONNEG, "std": _NONNEG, "step": {"type": "number", "exclusiveMinimum": 0}},
        },
    },
}

_UTILITY = {
    "type": "object",
    "oneOf": [{"required": ["alpha", "beta"]}, {"required": ["pieces"]}],
    "properties": {
        "alpha": _NONNEG, "beta": _NONNEG,
        "pieces": {"type": "array", "minItems": 1,
                   "items": {"type": "array", "minItems": 3, "maxItems": 3, "items": _NUM}},
    },
}

_DEMAND = {"type": "object", "required": ["gamma", "lambda"],
           "properties": {"gamma": _NUM, "lambda": {"type": "number", "exclusiveMinimum": 0}}}

_TASK = {
    "type": "object",
    "required": ["id", "targets", "configurations"],
    "properties": {
        "id": {"type": "string"},
        "targets": _TARGETS,
        "intensity": {"type": ["string", "null"]},
        "configurations": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["id", "rate", "histogram"],
                "properties": {"id": {"type": "string"}, "rate": {"type": "number", "exclusiveMinimum": 0},
                               "histogram": _HISTOGRAM, "tags": {"type": "object"}},
            },
        },
    },
}

WORKLOAD_SCHEMA = {
    "type": "object",
    "required": ["tasks"],
    "properties": {"utility": _UTILITY, "demand": _DEMAND, "tasks": {"type": "array", "items": _TASK}},
}

DAG_SCHEMA = {
    "type": "object",
    "required": ["nodes"],
    "properties": {
        "nodes": {
            "type": "array", "minItems": 1,
            "items": {
                "type": "object", "required": ["id", "options"],
                "properties": {
                    "id": {"type": "string"},
                    "options": {"type": "array", "minItems": 1,
                                "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NONNEG}},
                },
            },
        },
        "edges": {"type": "array",
                  "items": {"type": "array", "minItems": 2, "maxItems": 2, "items": {"type": "string"}}},
        "utility": _UTILITY,
        "demand": _DEMAND,
    },
}

_AGENT = {
    "type": "object",
    "required": ["name", "kind"],
    "properties": {
        "name": {"type": "string"}, "kind": {"enum": list(AGENT_KINDS)},
        "config": {"type": "string"}, "k": {"type": "number", "exclusiveMinimum": 0},
        "sigma": _NONNEG, "risk_lambda": _NONNEG,
        "bounds": {"type": "array", "minItems": 2, "maxItems": 2, "items": _NUM},
        "p_radius": {"type": "number", "minimum": 0, "maximum": 1},
    },
}

SCENARIO_SCHEMA = {
    "type": "object",
    "required": ["seed", "agents"],
    "oneOf": [{"required": ["tasks"]}, {"required": ["synthetic"]}],
    "properties": {
        "seed": {"type": "integer"},
        "utility": _UTILITY, "demand": _DEMAND,
        "tasks": {"type": "array", "items": _TASK},
        "synthetic": {
            "type": "object", "required": ["n_tasks"],
            "properties": {"n_tasks": {"type": "integer", "minimum": 1},
                           "n_configs": {"type": "integer", "minimum": 1},
                           "mean_range": _NUMS, "var_range": _NUMS, "rate_range": _NUMS},
        },
        "agents": {"type": "array", "minItems": 1, "items": _AGENT},
        "max_trials": {"type": ["integer", "null"], "minimum": 0},
        "epsilon": {"type": "number", "exclusiveMinimum": 0},
    },
}

AUCTION_SCHEMA = {
    "type": "object",
    "required": ["targets", "bids"],
    "properties": {
        "task": {"type": "string"},
        "targets": _TARGETS,
        "utility": _UTILITY,
        "bids": {
            "type": "array", "minItems": 2,
            "items": {
                "type": "object", "required": ["agent", "probs", "expected_times", "prices"],
                "properties": {"agent": {"type": "string"}, "probs": _NUMS, "expected_times": _NUMS,
                               "prices": {"oneOf": [_NUMS, {"type": "object", "required": ["intercepts", "slopes"]}]},
                               "true_costs": _NUMS},
            },
        },
    },
}


# ---------------------------------------------------------------- parsing helpers

def read_document(path: str | Path, schema: dict) -> dict:
    """Parse and validate a JSON file, raising FormatError with a location."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read: {exc.strerror}") from None
    return parse_document(text, schema, str(path))


def parse_document(text: str, schema: dict, source: str = "<string>") -> dict:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    error = jsonschema.exceptions.best_match(jsonschema.Draft7Validator(schema).iter_errors(doc))
    if error is not None:
        path = list(error.absolute_path)
        where = "".join(f"[{p!r}]" if isinstance(p, int) else f".{p}" for p in path) or "(root)"
        line, col = _locate(text, path)
        raise FormatError(f"{source}:{line}:{col}: at {where}: {error.message}")
    return doc


_DECODER = json.JSONDecoder()
_WS = " \t\n\r"


def _skip(text: str, i: int) -> int:
    while i < len(text) and text[i] in _WS:
        i += 1
    return i


def _locate(text: str, path: Sequence) -> tuple[int, int]:
    """1-based (line, column) where the value at ``path`` starts in valid JSON ``text``."""
    i = _skip(text, 0)
    for key in path:
        opener = text[i]
        i = _skip(text, i + 1)
        index = 0
        while text[i] not in "]}":
            if opener == "{":
                name, i = _DECODER.raw_decode(text, i)
                i = _skip(text, _skip(text, i) + 1)        # past ':'
                hit = name == key
            else:
                hit = index == key
            if hit:
                break
            _, i = _DECODER.raw_decode(text, i)
            i = _skip(text, i)
            if text[i] == ",":
                i = _skip(text, i + 1)
            index += 1
    line = text.count("\n", 0, i) + 1
    return line, i - (text.rfind("\n", 0, i) + 1) + 1


def _guard(source: str, fn, *args):
    """Run a constructor, turning its validation errors into FormatError."""
    try:
        return fn(*args)
    except (ValueError, KeyError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{source}: {exc}") from None


def _targets(raw) -> tuple[float, ...]:
    return tuple(math.inf if t is None else float(t) for t in raw)


def _histogram(raw: dict) -> CompletionHistogram:
    if "gaussian" in raw:
        g = raw["gaussian"]
        return CompletionHistogram.from_gaussian(g["mean"], g["std"], step=g.get("step", 0.1))
    if "edges" in raw:
        return CompletionHistogram.from_bins(raw["edges"], raw["masses"])
    if "times" in raw:
        return CompletionHistogram.from_points(raw["times"], raw["masses"])
    return CompletionHistogram(raw["lo"], raw["hi"], raw["masses"])


def _utility(raw: dict | None, targets) -> PiecewiseUtility:
    raw = raw or {"alpha": 1.0, "beta": 1.0}
    if "pieces" in raw:
        return PiecewiseUtility(targets, [tuple(p) for p in raw["pieces"]])
    return PiecewiseUtility.linear(raw["alpha"], raw["beta"], targets)


def _linear(raw: dict | None, source: str) -> tuple[float, float]:
    raw = raw or {"alpha": 1.0, "beta": 1.0}
    if "pieces" in raw:
        pieces = {tuple(p) for p in raw["pieces"]}
        if len(pieces) != 1 or next(iter(pieces))[0] != 0:
            raise FormatError(f"{source}: a single linear utility piece is required here")
        _, a, b = next(iter(pieces))
        return float(a), float(b)
    return float(raw["alpha"]), float(raw["beta"])


def _demand(raw: dict | None, default=(1000.0, 1.0)) -> DemandCurve:
    if raw is None:
        return DemandCurve(*default)
    return DemandCurve(raw["gamma"], raw["lambda"])


def _task(raw: dict) -> Task:
    configs = tuple(Configuration(c["id"], c["rate"], _histogram(c["histogram"]), dict(c.get("tags", {})))
                    for c in raw["configurations"])
    return Task(raw["id"], configs, _targets(raw["targets"]), raw.get("intensity"))


# ---------------------------------------------------------------- workloads

class Workload:
    def __init__(self, tasks: Sequence[Task], utility: dict | None = None, demand: DemandCurve | None = None):
        self.tasks = tuple(tasks)
        self.utility_doc = utility
        self.demand = demand or DemandCurve(1000.0, 1.0)

    def task(self, task_id: str) -> Task:
        for t in self.tasks:
            if t.id == task_id:
                return t
        raise KeyError(f"no task {task_id!r}; known: {', '.join(t.id for t in self.tasks)}")

    def utility(self, task: Task) -> PiecewiseUtility:
        return _utility(self.utility_doc, task.targets)


def load_workload(path) -> Workload:
    doc = read_document(path, WORKLOAD_SCHEMA)
    return workload_from_doc(doc, str(path))


def workload_from_doc(doc: dict, source: str = "<workload>") -> Workload:
    tasks = _guard(source, lambda: tuple(_task(t) for t in doc["tasks"]))
    ids = [t.id for t in tasks]
    if len(set(ids)) != len(ids):
        raise FormatError(f"{source}: duplicate task ids")
    for t in tasks:
        _guard(source, _utility, doc.get("utility"), t.targets)
    return Workload(tasks, doc.get("utility"), _guard(source, _demand, doc.get("demand")))


def workload_to_doc(w: Workload) -> dict:
    doc: dict[str, Any] = {}
    if w.utility_doc is not None:
        doc["utility"] = w.utility_doc
    doc["demand"] = {"gamma": w.demand.gamma, "lambda": w.demand.lam}
    doc["tasks"] = [task_to_doc(t) for t in w.tasks]
    return doc


def task_to_doc(t: Task) -> dict:
    return {
        "id": t.id,
        "targets": [None if math.isinf(x) else x for x in t.targets],
        "intensity": t.intensity,
        "configurations": [
            {"id": c.id, "rate": c.rate,
             "histogram": {"lo": c.histogram.lo.tolist(), "hi": c.histogram.hi.tolist(),
                           "masses": c.histogram.masses.tolist()},
             "tags": dict(c.tags)}
            for c in t.configs
        ],
    }


# ---------------------------------------------------------------- task graphs

def load_dag(path):
    doc = read_document(path, DAG_SCHEMA)
    return dag_from_doc(doc, str(path))


def dag_from_doc(doc: dict, source: str = "<dag>"):
    """(graph, (alpha_u, beta_u), demand); defaults to ``U = -t - price`` and ``M = 100 + 0.01 U``."""
    nodes = tuple(n["id"] for n in doc["nodes"])
    options = {n["id"]: tuple(Option(*o) for o in n["options"]) for n in doc["nodes"]}
    edges = tuple(tuple(e) for e in doc.get("edges", ()))
    g = _guard(source, TaskGraph, nodes, edges, options)
    return g, _linear(doc.get("utility"), source), _guard(source, _demand, doc.get("demand"), (100.0, 0.01))


def dag_to_doc(g: TaskGraph, utility=(1.0, 1.0), demand: DemandCurve | None = None) -> dict:
    demand = demand or DemandCurve(100.0, 0.01)
    return {
        "nodes": [{"id": n, "options": [[o.time, o.cost] for o in g.options[n]]} for n in g.nodes],
        "edges": [list(e) for e in g.edges],
        "utility": {"alpha": utility[0], "beta": utility[1]},
        "demand": {"gamma": demand.gamma, "lambda": demand.lam},
    }


# ---------------------------------------------------------------- scenarios

def load_scenario(path, seed: int | None = None) -> Scenario:
    doc = read_document(path, SCENARIO_SCHEMA)
    return scenario_from_doc(doc, str(path), seed)


def scenario_from_doc(doc: dict, source: str = "<scenario>", seed: int | None = None) -> Scenario:
    seed = doc["seed"] if seed is None else seed
    if "synthetic" in doc:
        syn = dict(doc["synthetic"])
        tasks = _guard(source, lambda: generate_synthetic_workload(seed, **syn))
    else:
        tasks = workload_from_doc({"tasks": doc["tasks"]}, source).tasks
    alpha_u, beta_u = _linear(doc.get("utility"), source)
    agents = []
    for a in doc["agents"]:
        extra = {}
        if "bounds" in a:
            extra["bound_lo"], extra["bound_hi"] = a["bounds"]
        for key in ("k", "sigma", "risk_lambda", "p_radius"):
            if key in a:
                extra[key] = a[key]
        agents.append(_guard(source, lambda: AgentModel(a["name"], a["kind"], a.get("config"), **extra)))
    kwargs = {}
    if "epsilon" in doc:
        kwargs["eps"] = doc["epsilon"]
    return _guard(source, lambda: Scenario(seed, tasks, tuple(agents), _demand(doc.get("demand")),
                                           alpha_u, beta_u, max_trials=doc.get("max_trials"), **kwargs))


# ---------------------------------------------------------------- auctions

def load_auction(path):
    doc = read_document(path, AUCTION_SCHEMA)
    return auction_from_doc(doc, str(path))


def auction_from_doc(doc: dict, source: str = "<auction>"):
    """(bids, alpha_u, beta_u)."""
    targets = _targets(doc["targets"])
    alpha_u, beta_u = _linear(doc.get("utility"), source)
    bids = []
    for b in doc["bids"]:
        def build(b=b):
            raw = b["prices"]
            if isinstance(raw, dict):
                prices = PriceSchedule(targets, raw["intercepts"], raw["slopes"])
            else:
                prices = PriceSchedule.constant(targets, raw)
            contract = Contract(doc.get("task"), {}, targets, b["probs"], b["expected_times"], prices)
            true = None
            if "true_costs" in b:
                true = IntervalStats(np.asarray(b["probs"], float), np.asarray(b["expected_times"], float),
                                     np.asarray(b["true_costs"], float))
            return Bid(b["agent"], contract, true)
        bids.append(_guard(source, build))
    return bids, alpha_u, beta_u


# ---------------------------------------------------------------- output

def fmt(x: float) -> str:
    return f"{x:.{DIGITS}g}"


def rounded(obj):
    """Copy of ``obj`` with floats cut to 12 significant digits and infinities as null."""
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return rounded(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x) or math.isnan(x):
            return None
        return float(fmt(x))
    return obj


def dumps(obj) -> str:
    return json.dumps(rounded(obj), indent=2)


def write_csv(rows: Iterable[dict], fields: Sequence[str], stream=None) -> str:
    """RFC-4180 CSV; floats with 12 significant digits. Returns the text if no stream is given."""
    out = stream if stream is not None else io.StringIO()
    writer = csv.writer(out, lineterminator="\r\n")
    writer.writerow(fields)
    for row in rows:
        writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else ("" if v is None else v)
                         for v in (row.get(f) for f in fields)])
    return out.getvalue() if stream is None else ""


def contract_to_doc(c: Contract) -> dict:
    return {
        "task": c.task,
        "stats": dict(c.stats),
        "targets": [None if math.isinf(t) else t for t in c.targets],
        "probs": c.probs,
        "expected_times": c.expected_times,
        "prices": {"intercepts": c.prices.intercepts, "slopes": c.prices.slopes},
    }
