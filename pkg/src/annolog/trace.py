"""Rule traces: every interpretation change together with its cause.

A trace is enough to rebuild the final interpretation from the initial
(all-unknown) world, which ``replay`` does and checks along the way.
"""
from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ReplayDivergence
from .lattice import Interval
from .model import World, format_element, is_edge

SCHEMA = "annolog-trace-v1"
RESOLUTION = "inconsistency-resolution"
BASE_COLUMNS = ["t", "gamma", "element", "predicate", "old_lower", "old_upper",
                "new_lower", "new_upper", "cause"]


@dataclass(frozen=True)
class TraceEntry:
    t: int
    gamma_iteration: int
    element: object
    predicate: str
    old_bound: Interval
    new_bound: Interval
    cause: str
    clause_groundings: tuple = ()
    static: bool = False
    detail: str = ""

    @property
    def key(self):
        return (self.element, self.predicate)


@dataclass
class Trace:
    persistence_mode: str = "persistent"
    horizon: int = 0
    entries: list[TraceEntry] = field(default_factory=list)

    def record(self, entry: TraceEntry) -> None:
        self.entries.append(entry)

    def extend(self, entries) -> None:
        self.entries.extend(entries)

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)

    def history(self, element, predicate) -> list[TraceEntry]:
        return [e for e in self.entries if e.element == element and e.predicate == predicate]

    def clause_columns(self) -> int:
        return max((len(e.clause_groundings) for e in self.entries), default=0)


def _ground_list(items) -> str:
    return ";".join(format_element(x) for x in items)


def to_csv(trace: Trace, n_clauses: int | None = None) -> str:
    """CSV with one row per change; clause lists are ``;``-joined, edges print as ``(src;dst)``."""
    n = max(trace.clause_columns(), n_clauses or 0)
    lines = [f"# {SCHEMA}", ",".join(BASE_COLUMNS + [f"clause_{i + 1}" for i in range(n)])]
    for e in trace.entries:
        groundings = [_ground_list(g) for g in e.clause_groundings]
        groundings += [""] * (n - len(groundings))
        row = [str(e.t), str(e.gamma_iteration), format_element(e.element), e.predicate,
               repr(e.old_bound.lower), repr(e.old_bound.upper),
               repr(e.new_bound.lower), repr(e.new_bound.upper), e.cause] + groundings
        lines.append(",".join(_field(x) for x in row))
    return "\n".join(lines) + "\n"


def _field(text: str) -> str:
    # quote lists and edges as well as anything csv itself would need quoted
    if any(ch in text for ch in _QUOTE_CHARS):
        return '"' + text.replace('"', '""') + '"'
    return text


_QUOTE_CHARS = set(',";()\n\r')


def read_csv(text: str) -> list[dict]:
    """Rows of a CSV trace as dicts of strings (the schema comment line is skipped)."""
    body = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(body))


def _jsonable_element(x):
    return list(x) if is_edge(x) else x


def _element_from_json(x):
    return tuple(x) if isinstance(x, list) else x


def to_json(trace: Trace) -> str:
    entries = []
    for e in trace.entries:
        entries.append({
            "t": e.t,
            "gamma": e.gamma_iteration,
            "element": _jsonable_element(e.element),
            "predicate": e.predicate,
            "old": [e.old_bound.lower, e.old_bound.upper],
            "new": [e.new_bound.lower, e.new_bound.upper],
            "cause": e.cause,
            "clause_groundings": [[_jsonable_element(x) for x in g] for g in e.clause_groundings],
            "static": e.static,
            "detail": e.detail,
        })
    doc = {"schema": SCHEMA, "persistence_mode": trace.persistence_mode,
           "horizon": trace.horizon, "entries": entries}
    return json.dumps(doc, indent=1)


def from_json(document) -> Trace:
    doc = json.loads(document) if isinstance(document, (str, bytes)) else document
    if doc.get("schema") != SCHEMA:
        raise ValueError(f"not an {SCHEMA} document")
    trace = Trace(doc["persistence_mode"], doc["horizon"])
    for r in doc["entries"]:
        trace.record(TraceEntry(
            t=r["t"],
            gamma_iteration=r["gamma"],
            element=_element_from_json(r["element"]),
            predicate=r["predicate"],
            old_bound=Interval(*r["old"]),
            new_bound=Interval(*r["new"]),
            cause=r["cause"],
            clause_groundings=tuple(tuple(_element_from_json(x) for x in g) for g in r["clause_groundings"]),
            static=r["static"],
            detail=r.get("detail", ""),
        ))
    return trace


def export(trace: Trace, format: str = "csv", path=None, n_clauses: int | None = None) -> str:
    if format == "csv":
        text = to_csv(trace, n_clauses)
    elif format == "json":
        text = to_json(trace)
    else:
        raise ValueError(f"unknown trace format {format!r}")
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def replay(initial_world: World, trace: Trace, expected: World | None = None) -> World:
    """Re-apply every recorded change to a copy of ``initial_world``.

    Each entry's old bound must match the replayed state.  In reset mode
    non-static atoms return to [0, 1] whenever time advances, exactly as the
    engine does.  With ``expected`` the final bounds are compared as well.
    """
    world = initial_world.copy()
    reset = trace.persistence_mode == "reset"
    now = 0
    for index, e in enumerate(trace.entries):
        if e.t > now:
            if reset:
                world.reset_nonstatic()
            now = e.t
        found = world.get(e.element, e.predicate)
        if found != e.old_bound:
            raise ReplayDivergence(index, e, found)
        world.set(e.key, e.new_bound, static=True if e.static else None, t=e.t)
    if reset and trace.horizon > now:
        world.reset_nonstatic()
    world.current_time = max(now, trace.horizon)
    if expected is not None:
        for key, bound in expected.items():
            if world.get(*key) != bound:
                raise ReplayDivergence(len(trace.entries), _Final(key, bound), world.get(*key))
    return world


@dataclass(frozen=True)
class _Final:
    key: tuple
    old_bound: Interval


def entry_as_dict(entry: TraceEntry) -> dict:
    return asdict(entry)
