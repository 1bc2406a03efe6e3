"""Knowledge graph, predicate registry, the interpretation store and facts."""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, NamedTuple, Union

import yaml

from .errors import BadAnnotation, DanglingEdge, ParseError, RangeError, UnknownAtom, UnknownPredicate, UnknownType
from .lattice import BOTTOM, TRUE, Interval, check_consistent, tighten

log = logging.getLogger(__name__)

REL = "rel"
FORMAT_HEADER = "annolog-v1"

Node = str
Edge = tuple[str, str]
Element = Union[Node, Edge]
Key = tuple  # (element, predicate)


def is_edge(element) -> bool:
    return isinstance(element, tuple)


def element_sort_key(element):
    if is_edge(element):
        return (1, element[0], element[1])
    return (0, element, "")


def key_sort_key(key):
    return (element_sort_key(key[0]), key[1])


def natural_key(text: str):
    return tuple(int(p) if p.isdigit() else p for p in re.split(r"(\d+)", text))


def format_element(element) -> str:
    if is_edge(element):
        return f"({element[0]};{element[1]})"
    return str(element)


def format_key(key) -> str:
    element, predicate = key
    if is_edge(element):
        return f"{predicate}({element[0]},{element[1]})"
    return f"{predicate}({element})"


class KnowledgeGraph:
    """Directed graph whose nodes are the constants of the language.

    Node and edge attributes hold the initial annotations read from the input
    graph; ``node_types`` maps constants to the type tags used for
    predicate-constant type checking.
    """

    def __init__(self, nodes=(), edges=(), node_attributes=None, edge_attributes=None, node_types=None):
        self.nodes: list[Node] = list(dict.fromkeys(str(n) for n in nodes))
        node_set = set(self.nodes)
        self.edges: list[Edge] = []
        self._edge_set: set[Edge] = set()
        for src, dst in edges:
            e = (str(src), str(dst))
            if e[0] not in node_set or e[1] not in node_set:
                raise DanglingEdge(f"edge {e} references an unknown node")
            if e not in self._edge_set:
                self._edge_set.add(e)
                self.edges.append(e)
        self.node_attributes: dict[Node, dict[str, Interval]] = dict(node_attributes or {})
        self.edge_attributes: dict[Edge, dict[str, Interval]] = dict(edge_attributes or {})
        self.node_types: dict[Node, str] = dict(node_types or {})
        for n in self.node_attributes:
            if n not in node_set:
                raise DanglingEdge(f"attributes given for unknown node {n!r}")
        for e in self.edge_attributes:
            if e not in self._edge_set:
                raise DanglingEdge(f"attributes given for unknown edge {e}")
        for attrs in list(self.node_attributes.values()) + list(self.edge_attributes.values()):
            if REL in attrs:
                raise BadAnnotation("'rel' is reserved and implied by edge existence")
        self._succ: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        self._pred: dict[Node, list[Node]] = {n: [] for n in self.nodes}
        for src, dst in self.edges:
            self._succ[src].append(dst)
            self._pred[dst].append(src)

    def has_edge(self, src, dst) -> bool:
        return (src, dst) in self._edge_set

    def successors(self, node) -> list[Node]:
        return self._succ.get(node, [])

    def predecessors(self, node) -> list[Node]:
        return self._pred.get(node, [])

    def __contains__(self, node) -> bool:
        return node in self._succ

    def __repr__(self):
        return f"KnowledgeGraph({len(self.nodes)} nodes, {len(self.edges)} edges)"


@dataclass
class PredicateRegistry:
    unary: set[str] = field(default_factory=set)
    binary: set[str] = field(default_factory=set)
    static_predicates: set[str] = field(default_factory=set)
    type_constraints: dict[str, Union[str, tuple[str, str]]] = field(default_factory=dict)
    types: set[str] | None = None
    node_types: dict[str, str] = field(default_factory=dict)
    complement_pairs: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self.unary = set(self.unary)
        self.binary = set(self.binary) | {REL}
        self.static_predicates = set(self.static_predicates) | {REL}
        if REL in self.unary:
            raise ValueError("'rel' is a reserved binary predicate")
        both = self.unary & self.binary
        if both:
            raise ValueError(f"predicates declared both unary and binary: {sorted(both)}")
        constraints = {}
        for pred, sig in self.type_constraints.items():
            if isinstance(sig, (list, tuple)):
                sig = tuple(sig)
                if len(sig) != 2:
                    raise ValueError(f"binary type constraint for {pred} needs two types")
            constraints[pred] = sig
        self.type_constraints = constraints
        seen = set()
        pairs = []
        for a, b in self.complement_pairs:
            token = frozenset((a, b))
            if token in seen:
                raise ValueError(f"complement pair ({a}, {b}) listed twice")
            seen.add(token)
            pairs.append((a, b))
        self.complement_pairs = pairs
        self._partners: dict[str, list[str]] = {}
        for a, b in pairs:
            self._partners.setdefault(a, []).append(b)
            self._partners.setdefault(b, []).append(a)

    @property
    def predicates(self) -> set[str]:
        return self.unary | self.binary

    @property
    def target_predicates(self) -> set[str]:
        return self.predicates - self.static_predicates

    def arity(self, predicate: str) -> int:
        if predicate in self.unary:
            return 1
        if predicate in self.binary:
            return 2
        raise UnknownPredicate(f"unknown predicate {predicate!r}")

    def is_static(self, predicate: str) -> bool:
        return predicate in self.static_predicates

    def partners(self, predicate: str) -> list[str]:
        return self._partners.get(predicate, [])

    def declared_types(self, graph: KnowledgeGraph | None = None) -> set[str]:
        if self.types is not None:
            return set(self.types)
        found = set(self.node_types.values())
        if graph is not None:
            found |= set(graph.node_types.values())
        return found

    def with_predicates(self, unary=(), binary=(), static=()) -> PredicateRegistry:
        """Copy of this registry with extra predicates declared."""
        return replace(
            self,
            unary=self.unary | set(unary),
            binary=self.binary | set(binary),
            static_predicates=self.static_predicates | set(static),
        )


def load_registry(document) -> PredicateRegistry:
    """Build a registry from a YAML document (text) or an already-parsed mapping.

    Recognised keys: ``unary``, ``binary``, ``static``, ``types``,
    ``constraints`` (predicate -> type or [type, type]), ``node_types`` and
    ``complements`` (list of predicate pairs).
    """
    data = _load_yaml(document)
    if data is None:
        return PredicateRegistry()
    if not isinstance(data, dict):
        raise ParseError("registry document must be a mapping")
    types = data.get("types")
    try:
        return PredicateRegistry(
            unary=set(data.get("unary") or ()),
            binary=set(data.get("binary") or ()),
            static_predicates=set(data.get("static") or ()),
            type_constraints=dict(data.get("constraints") or {}),
            types=set(types) if types is not None else None,
            node_types={str(k): str(v) for k, v in (data.get("node_types") or {}).items()},
            complement_pairs=[tuple(p) for p in data.get("complements") or ()],
        )
    except ValueError as exc:
        raise ParseError(str(exc)) from exc


def _load_yaml(document):
    if document is None:
        return None
    if isinstance(document, (dict, list)):
        return document
    text = str(document)
    first = next((ln.strip() for ln in text.splitlines() if ln.strip()), "")
    if first and first.lstrip("#").strip() != FORMAT_HEADER:
        raise ParseError(f"missing '# {FORMAT_HEADER}' header line", line=1)
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ParseError(f"malformed document: {exc}",
                         line=mark.line + 1 if mark else None,
                         column=mark.column + 1 if mark else None) from exc


@dataclass(frozen=True)
class Fact:
    """A ground annotated atom asserted over an inclusive range of timesteps.

    Static facts ignore the range and hold for the whole horizon.
    """

    element: Element
    predicate: str
    bound: Interval
    static: bool = False
    t_start: int = 0
    t_end: int | None = None
    id: str | None = None

    def __post_init__(self):
        if self.t_start < 0:
            raise RangeError(f"fact {self.id or self.predicate} starts before t=0")
        if self.t_end is not None and self.t_end < self.t_start:
            raise RangeError(f"fact {self.id or self.predicate} has t_start > t_end")

    @property
    def key(self) -> Key:
        return (self.element, self.predicate)

    def timesteps(self, horizon: int | None = None) -> range:
        end = self.t_start if self.t_end is None else self.t_end
        if horizon is not None:
            end = min(end, horizon)
        return range(self.t_start, end + 1)


def graph_facts(graph: KnowledgeGraph) -> list[Fact]:
    """Graph attributes as static facts; they describe the graph before t=0 and hold throughout."""
    out = []
    for node in graph.nodes:
        for pred, bound in sorted(graph.node_attributes.get(node, {}).items()):
            out.append(Fact(node, pred, bound, static=True, id="graph"))
    for edge in graph.edges:
        for pred, bound in sorted(graph.edge_attributes.get(edge, {}).items()):
            out.append(Fact(edge, pred, bound, static=True, id="graph"))
    return out


class World:
    """Current interpretation: (element, predicate) -> Interval, stored as a nested dict.

    Only type-compatible keys exist.  ``rel`` is never stored; it reads as
    ``[1, 1]`` on edges and ``[0, 1]`` elsewhere.  Negations are not stored
    either, callers negate on demand.
    """

    def __init__(self, graph: KnowledgeGraph, registry: PredicateRegistry):
        self.graph = graph
        self.registry = registry
        self.current_time = 0
        self._data: dict[Element, dict[str, Interval]] = {}
        self._static: set[Key] = set()
        # timestep of the last write per key; lets persistent runs tell carried values apart
        self._stamp: dict[Key, int] = {}
        self._by_pred: dict[str, list[Element]] = {}

    # -- construction helpers -------------------------------------------------
    def _add_slot(self, element, predicate, static=False):
        self._data.setdefault(element, {})[predicate] = BOTTOM
        self._by_pred.setdefault(predicate, []).append(element)
        if static:
            self._static.add((element, predicate))

    # -- reads ----------------------------------------------------------------
    def get(self, element, predicate) -> Interval:
        if predicate == REL:
            if is_edge(element) and self.graph.has_edge(*element):
                return TRUE
            return BOTTOM
        try:
            return self._data[element][predicate]
        except KeyError:
            raise UnknownAtom(f"no slot for {format_key((element, predicate))}") from None

    def lookup(self, element, predicate) -> Interval | None:
        if predicate == REL:
            return self.get(element, predicate)
        slot = self._data.get(element)
        if slot is None:
            return None
        return slot.get(predicate)

    def __getitem__(self, key) -> Interval:
        return self.get(*key)

    def __contains__(self, key) -> bool:
        element, predicate = key
        if predicate == REL:
            return is_edge(element) and self.graph.has_edge(*element)
        slot = self._data.get(element)
        return slot is not None and predicate in slot

    def is_static(self, key) -> bool:
        return key[1] == REL or key in self._static

    def elements_with(self, predicate) -> list[Element]:
        if predicate == REL:
            return list(self.graph.edges)
        return self._by_pred.get(predicate, [])

    def keys(self) -> Iterator[Key]:
        for element, slot in self._data.items():
            for predicate in slot:
                yield (element, predicate)

    def items(self) -> Iterator[tuple[Key, Interval]]:
        for element, slot in self._data.items():
            for predicate, bound in slot.items():
                yield (element, predicate), bound

    def __len__(self) -> int:
        return sum(len(slot) for slot in self._data.values())

    def stamp(self, key) -> int:
        return self._stamp.get(key, -1)

    # -- writes ---------------------------------------------------------------
    def set(self, key, bound: Interval, static: bool | None = None, t: int | None = None) -> None:
        element, predicate = key
        if key not in self:
            raise UnknownAtom(f"no slot for {format_key(key)}")
        self._data[element][predicate] = bound
        if static:
            self._static.add(key)
        elif static is False:
            self._static.discard(key)
        self._stamp[key] = self.current_time if t is None else t

    def reset_nonstatic(self) -> list[Key]:
        """Return every non-static entry to [0, 1]; returns the keys that actually moved."""
        moved = []
        for element, slot in self._data.items():
            for predicate, bound in slot.items():
                if bound is not BOTTOM and bound != BOTTOM and (element, predicate) not in self._static:
                    slot[predicate] = BOTTOM
                    moved.append((element, predicate))
        self._stamp.clear()
        return moved

    # -- copies ---------------------------------------------------------------
    def snapshot(self) -> dict[Key, tuple[Interval, bool]]:
        return {key: (bound, key in self._static) for key, bound in self.items()}

    def copy(self) -> World:
        other = World(self.graph, self.registry)
        other.current_time = self.current_time
        other._data = {e: dict(slot) for e, slot in self._data.items()}
        other._static = set(self._static)
        other._stamp = dict(self._stamp)
        other._by_pred = self._by_pred
        return other

    def __eq__(self, other):
        if not isinstance(other, World):
            return NotImplemented
        return self.snapshot() == other.snapshot()

    def __repr__(self):
        return f"World(t={self.current_time}, {len(self)} slots, {len(self._static)} static)"


def compatible(registry: PredicateRegistry, types: dict[str, str], predicate: str, element) -> bool:
    sig = registry.type_constraints.get(predicate)
    if sig is None:
        return True
    if is_edge(element):
        if not isinstance(sig, tuple):
            return True
        return all(types.get(c) is None or types[c] == s for c, s in zip(element, sig))
    if isinstance(sig, tuple):
        return True
    return types.get(element) is None or types[element] == sig


def init_world(graph: KnowledgeGraph, registry: PredicateRegistry) -> World:
    """Create one [0, 1] slot for every type-compatible (element, predicate) pair.

    Predicates that only appear as graph attributes are declared on the fly
    (unary for node attributes, binary for edge attributes, both static).
    """
    node_attr = {p for attrs in graph.node_attributes.values() for p in attrs}
    edge_attr = {p for attrs in graph.edge_attributes.values() for p in attrs}
    extra_unary = node_attr - registry.predicates
    extra_binary = edge_attr - registry.predicates
    if extra_unary or extra_binary:
        registry = registry.with_predicates(extra_unary, extra_binary, extra_unary | extra_binary)
    for p in node_attr & registry.binary:
        raise BadAnnotation(f"binary predicate {p!r} used as a node attribute")
    for p in edge_attr & registry.unary:
        raise BadAnnotation(f"unary predicate {p!r} used as an edge attribute")

    declared = registry.declared_types(graph)
    for pred, sig in registry.type_constraints.items():
        for t in (sig if isinstance(sig, tuple) else (sig,)):
            if t not in declared:
                raise UnknownType(f"constraint on {pred!r} references undeclared type {t!r}")

    types = dict(graph.node_types)
    types.update(registry.node_types)
    if registry.type_constraints:
        untyped = [n for n in graph.nodes if n not in types]
        if untyped:
            log.warning("%d node(s) carry no type tag; type checking is skipped for them (e.g. %s)",
                        len(untyped), untyped[0])

    world = World(graph, registry)
    for predicate in sorted(registry.unary):
        static = registry.is_static(predicate)
        for node in graph.nodes:
            if compatible(registry, types, predicate, node):
                world._add_slot(node, predicate, static)
    for predicate in sorted(registry.binary - {REL}):
        static = registry.is_static(predicate)
        for edge in graph.edges:
            if compatible(registry, types, predicate, edge):
                world._add_slot(edge, predicate, static)
    return world


# -- scheduled facts ----------------------------------------------------------

class QueuedUpdate(NamedTuple):
    """An annotation waiting to be applied at a given timestep (a user fact or a delayed rule firing)."""

    key: Key
    bound: Interval
    cause: str
    order: tuple
    groundings: tuple = ()


@dataclass(frozen=True)
class InitialChange:
    key: Key
    old: Interval
    new: Interval
    cause: str
    detail: str = ""


class FactQueue:
    """Updates indexed by the timestep at which they take effect."""

    def __init__(self):
        self._due: dict[int, list[QueuedUpdate]] = {}
        self._seen: set = set()
        self.initial: list[InitialChange] = []

    def push(self, t: int, update: QueuedUpdate, dedupe: bool = True) -> bool:
        if dedupe:
            token = (t, update.key, update.bound, update.cause)
            if token in self._seen:
                return False
            self._seen.add(token)
        self._due.setdefault(t, []).append(update)
        return True

    def due(self, t: int) -> list[QueuedUpdate]:
        return sorted(self._due.get(t, ()), key=lambda u: u.order)

    def pop(self, t: int) -> list[QueuedUpdate]:
        items = self.due(t)
        self._due.pop(t, None)
        return items

    def timesteps(self) -> list[int]:
        return sorted(self._due)

    def __len__(self):
        return sum(len(v) for v in self._due.values())


def schedule_facts(world: World, facts: Iterable[Fact], horizon: int | None = None) -> FactQueue:
    """Queue timed facts and apply static facts to ``world`` right away.

    Conflicting timed facts are not rejected here; they surface when applied.
    Two conflicting static facts leave the atom at [0, 1].
    """
    queue = FactQueue()
    resolved = set()
    for index, fact in enumerate(facts):
        key = fact.key
        if fact.predicate == REL:
            raise UnknownAtom("'rel' is implied by the graph and cannot be asserted")
        if key not in world:
            raise UnknownAtom(f"fact targets missing or type-incompatible atom {format_key(key)}")
        cause = fact.id or f"fact_{index + 1}"
        if fact.static or world.registry.is_static(fact.predicate):
            if not fact.static:
                log.warning("fact on static predicate %s treated as static", fact.predicate)
            if key in resolved:
                continue
            old = world.get(*key)
            if check_consistent(old, fact.bound):
                new = tighten(old, fact.bound)
                world.set(key, new, static=True, t=0)
                if new != old:
                    queue.initial.append(InitialChange(key, old, new, cause))
            else:
                resolved.add(key)
                world.set(key, BOTTOM, static=True, t=0)
                queue.initial.append(InitialChange(key, old, BOTTOM, "inconsistency-resolution",
                                                   f"incoming {fact.bound} from {cause}"))
            continue
        for t in fact.timesteps(horizon):
            queue.push(t, QueuedUpdate(key, fact.bound, cause, (0, index)))
    return queue


def parse_element(raw) -> Element:
    if isinstance(raw, (list, tuple)):
        if len(raw) != 2:
            raise ParseError(f"edge element must have two endpoints, got {raw!r}")
        return (str(raw[0]), str(raw[1]))
    return str(raw)


def parse_facts(document) -> list[Fact]:
    """Read facts from a YAML document (text or parsed data).

    The document is either a list of records or a mapping with a ``facts``
    list.  Each record has ``element`` (node id or ``[src, dst]``),
    ``predicate``, ``lower``, ``upper`` and optionally ``static``,
    ``t_start``, ``t_end`` and ``id``.
    """
    data = _load_yaml(document)
    if data is None:
        return []
    if isinstance(data, dict):
        data = data.get("facts") or []
    if not isinstance(data, list):
        raise ParseError("facts document must be a list of records")
    facts = []
    for i, rec in enumerate(data):
        if not isinstance(rec, dict):
            raise ParseError(f"fact record {i + 1} is not a mapping")
        missing = {"element", "predicate"} - rec.keys()
        if missing:
            raise ParseError(f"fact record {i + 1} lacks {sorted(missing)}")
        try:
            lower = float(rec.get("lower", 1.0))
            upper = float(rec.get("upper", 1.0))
        except (TypeError, ValueError) as exc:
            raise ParseError(f"fact record {i + 1}: non-numeric bound") from exc
        if not (0.0 <= lower <= upper <= 1.0):
            raise RangeError(f"fact record {i + 1}: bound [{lower}, {upper}] is not a subinterval of [0, 1]")
        static = bool(rec.get("static", False))
        t_start = int(rec.get("t_start", 0))
        t_end = rec.get("t_end")
        t_end = None if static else (int(t_end) if t_end is not None else t_start)
        if t_end is not None and t_start > t_end:
            raise RangeError(f"fact record {i + 1}: t_start {t_start} > t_end {t_end}")
        facts.append(Fact(parse_element(rec["element"]), str(rec["predicate"]), Interval(lower, upper),
                          static=static, t_start=0 if static else t_start, t_end=t_end,
                          id=str(rec["id"]) if rec.get("id") is not None else None))
    return facts


def dump_facts(facts: Iterable[Fact]) -> str:
    records = []
    for f in facts:
        rec = {
            "element": list(f.element) if is_edge(f.element) else f.element,
            "predicate": f.predicate,
            "lower": f.bound.lower,
            "upper": f.bound.upper,
        }
        if f.static:
            rec["static"] = True
        else:
            rec["t_start"] = f.t_start
            rec["t_end"] = f.t_end if f.t_end is not None else f.t_start
        if f.id:
            rec["id"] = f.id
        records.append(rec)
    return f"# {FORMAT_HEADER}\n" + yaml.safe_dump({"facts": records}, sort_keys=False)
