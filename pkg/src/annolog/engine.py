"""Grounding, the per-timestep fixpoint loop and interpretation updates.

Each timestep runs in passes.  Pass 1 applies the updates due at ``t``
(user facts first, then delayed rule firings).  Every later pass grounds all
rules against the current world, applies the ``delta_t = 0`` instances and
queues the others for ``t + delta_t``.  The loop stops once a pass changes no
bound by ``epsilon`` or more.
"""
from __future__ import annotations

import logging
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

from .errors import ArityMismatch, InconsistencyHalt, IterationCapExceeded, StaticWriteAttempt
from .lattice import BOTTOM, EPSILON, TRUE, Interval, check_consistent, make_interval, moved, negate, tighten
from .model import (
    REL,
    Fact,
    FactQueue,
    KnowledgeGraph,
    PredicateRegistry,
    QueuedUpdate,
    World,
    element_sort_key,
    format_key,
    graph_facts,
    init_world,
    key_sort_key,
    natural_key,
    schedule_facts,
)
from .rules import Clause, Rule
from .trace import RESOLUTION, Trace, TraceEntry

log = logging.getLogger(__name__)

POLICIES = {"resolve": "resolve", "resolve-reset-static": "resolve", "halt": "halt", "halt-error": "halt"}
MODES = ("persistent", "reset")


@dataclass
class EngineConfig:
    horizon: int = 0
    persistence_mode: str = "persistent"
    inconsistency_policy: str = "resolve"
    epsilon: float = EPSILON
    max_inner_iterations: int | None = None  # None: 100 passes per stored atom
    workers: int = 1
    # test hook: shuffle instances before the canonical sort
    shuffle_seed: int | None = None
    # re-ground only heads near changed atoms; False re-grounds everything every pass
    incremental: bool = True

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.persistence_mode not in MODES:
            raise ValueError(f"persistence_mode must be one of {MODES}")
        if self.inconsistency_policy not in POLICIES:
            raise ValueError(f"unknown inconsistency policy {self.inconsistency_policy!r}")
        self.inconsistency_policy = POLICIES[self.inconsistency_policy]


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("ANNOLOG_WORKERS")
    if raw is None or raw.strip() == "":
        return default
    n = int(raw)
    if n == 0:
        return os.cpu_count() or 1
    return max(1, n)


@dataclass(frozen=True)
class GroundRuleInstance:
    rule_id: str
    head_key: tuple
    bound: Interval
    clause_groundings: tuple
    captured_annotations: tuple
    fire_time: int


# -- grounding ------------------------------------------------------------------

@dataclass(frozen=True)
class _Spec:
    """A clause with everything the inner loop needs precomputed."""

    index: int
    clause: Clause
    predicate: str
    is_rel: bool
    unary: bool
    a_var: bool
    a: str
    b_var: bool
    b: str
    negated: bool
    lo: float
    hi: float
    threshold: object
    mode: str = ""  # which arguments are known when the clause is reached, fixed by the plan
    a_known: bool = False
    b_known: bool = False

    def element(self, binding):
        a = binding[self.a] if self.a_var else self.a
        if self.unary:
            return a
        return (a, binding[self.b] if self.b_var else self.b)


@dataclass(frozen=True)
class _Plan:
    rule: Rule
    order: tuple[int, ...]
    specs: tuple[_Spec, ...]
    intro: dict  # variable -> plan position of the clause that binds it first (head variables: -1)


def _cost(clause: Clause, bound: set[str]) -> int:
    free = {t.name for t in clause.args if t.var} - bound
    if not free:
        return 0
    if len(clause.args) == 2 and len(free) == 1:
        return 1
    return 2


def _spec(index: int, clause: Clause, bound: set[str]) -> _Spec:
    a = clause.args[0]
    b = clause.args[1] if len(clause.args) == 2 else a
    lo, hi = (clause.bound.lower, clause.bound.upper) if clause.bound is not None else (0.0, 1.0)
    a_known = not a.var or a.name in bound
    b_known = not b.var or b.name in bound
    if len(clause.args) == 1:
        mode = "u_known" if a_known else "u_free"
    elif a_known and b_known:
        mode = "b_known"
    elif a_known:
        mode = "b_out"
    elif b_known:
        mode = "b_in"
    else:
        mode = "b_free"
    return _Spec(index, clause, clause.predicate, clause.predicate == REL, len(clause.args) == 1,
                 a.var, a.name, b.var, b.name, clause.negated, lo, hi, clause.threshold, mode,
                 a_known, b_known)


@lru_cache(maxsize=None)
def _plan(rule: Rule) -> _Plan:
    """Evaluation order: greedy within runs of unquantified clauses, quantified clauses stay put.

    A run of plain clauses is a join, so its order does not change the set of
    surviving bindings; a quantified clause sees exactly the bindings of
    everything written before it.
    """
    bound = set(rule.head_variables)
    order: list[int] = []
    run: list[int] = []
    specs: dict[int, _Spec] = {}
    intro = {v: -1 for v in bound}

    def take(i):
        order.append(i)
        specs[i] = _spec(i, rule.clauses[i], bound)
        for v in rule.clauses[i].variables:
            intro.setdefault(v, len(order) - 1)
        bound.update(rule.clauses[i].variables)

    def flush():
        while run:
            best = min(run, key=lambda i: (_cost(rule.clauses[i], bound), i))
            run.remove(best)
            take(best)

    for i, clause in enumerate(rule.clauses):
        if clause.threshold is None:
            run.append(i)
        else:
            flush()
            take(i)
    flush()
    return _Plan(rule, tuple(order), tuple(specs[i] for i in range(len(rule.clauses))),
                 dict(intro))


def _value(world: World, element, predicate):
    if predicate == REL:
        return TRUE if world.graph.has_edge(*element) else None
    return world.lookup(element, predicate)


def _candidates(world: World, s: _Spec, binding: dict):
    """(element, new variable assignments, interval) for every grounding of a clause under ``binding``."""
    pred = s.predicate
    data = world._data
    a = (binding.get(s.a) if s.a_var else s.a)
    if s.unary:
        if a is not None:
            slot = data.get(a)
            iv = slot.get(pred) if slot is not None else None
            return () if iv is None else ((a, None, iv),)
        name = s.a
        return [(n, {name: n}, data[n][pred]) for n in world.elements_with(pred)]
    b = (binding.get(s.b) if s.b_var else s.b)
    graph = world.graph
    out = []
    if s.is_rel:
        if a is not None and b is not None:
            return (((a, b), None, TRUE),) if graph.has_edge(a, b) else ()
        if a is not None:
            name = s.b
            return [((a, d), {name: d}, TRUE) for d in graph.successors(a)]
        if b is not None:
            name = s.a
            return [((x, b), {name: x}, TRUE) for x in graph.predecessors(b)]
        pairs = graph.edges
        get = None
    else:
        if a is not None and b is not None:
            slot = data.get((a, b))
            iv = slot.get(pred) if slot is not None else None
            return () if iv is None else (((a, b), None, iv),)
        if a is not None:
            name = s.b
            for d in graph.successors(a):
                slot = data.get((a, d))
                if slot is not None:
                    iv = slot.get(pred)
                    if iv is not None:
                        out.append(((a, d), {name: d}, iv))
            return out
        if b is not None:
            name = s.a
            for x in graph.predecessors(b):
                slot = data.get((x, b))
                if slot is not None:
                    iv = slot.get(pred)
                    if iv is not None:
                        out.append(((x, b), {name: x}, iv))
            return out
        pairs = world.elements_with(pred)
        get = data
    na, nb = s.a, s.b
    for e in pairs:
        iv = TRUE if get is None else get[e][pred]
        if na == nb:
            if e[0] == e[1]:
                out.append((e, {na: e[0]}, iv))
        else:
            out.append((e, {na: e[0], nb: e[1]}, iv))
    return out


def _reverse_step(world: World, s: _Spec, values: set, forward_known: str) -> set:
    """Values of the argument that was already bound when ``s`` introduced the other one."""
    graph = world.graph
    data = world._data
    pred = s.predicate
    out = set()
    if forward_known == "a":  # s walked a -> b; come back from b
        for y in values:
            for x in graph.predecessors(y):
                if s.is_rel or (x, y) in data and pred in data[(x, y)]:
                    out.add(x)
    else:
        for x in values:
            for y in graph.successors(x):
                if s.is_rel or (x, y) in data and pred in data[(x, y)]:
                    out.add(y)
    return out


def _affected_heads(plan: _Plan, world: World, dirty: dict[str, set]):
    """Head elements whose instance may differ after the keys in ``dirty`` changed.

    Every atom read while grounding a head lies on a chain of clauses leading
    back to the head variables, so walking those chains backwards from the
    changed atoms over-approximates the heads to redo.  ``None`` means all.
    """
    rule = plan.rule
    head_vars = set(rule.head_variables)
    affected: set = set()
    for s in plan.specs:
        elements = dirty.get(s.predicate)
        if not elements:
            continue
        sets: dict[str, set] = {}
        matched = False
        for x in elements:
            if s.unary:
                pairs = ((s.a_var, s.a, s.a_known, x),)
            else:
                pairs = ((s.a_var, s.a, s.a_known, x[0]), (s.b_var, s.b, s.b_known, x[1]))
            if any(not var and name != v for var, name, _, v in pairs):
                continue
            matched = True
            for var, name, known, v in pairs:
                if var and known:
                    sets.setdefault(name, set()).add(v)
        if not matched:
            continue
        if not sets:
            return None  # the clause's groundings do not depend on the head
        # walk back towards the head, latest-introduced variable first
        pending = sorted((v for v in sets if v not in head_vars), key=lambda v: -plan.intro[v])
        while pending:
            v = pending.pop(0)
            src = plan.specs[plan.order[plan.intro[v]]]
            if src.mode not in ("b_out", "b_in"):
                return None
            if src.mode == "b_out":
                known_var, known_name = src.a_var, src.a
                back = _reverse_step(world, src, sets[v], "a")
            else:
                known_var, known_name = src.b_var, src.b
                back = _reverse_step(world, src, sets[v], "b")
            if not known_var:
                return None  # anchored by a constant, independent of the head
            if known_name not in sets:
                sets[known_name] = set()
                if known_name not in head_vars:
                    pending.append(known_name)
                    pending.sort(key=lambda w: -plan.intro[w])
            sets[known_name] |= back
        affected |= _heads_matching(rule, world, {v: vals for v, vals in sets.items() if v in head_vars})
    return affected


def _heads_matching(rule: Rule, world: World, sets: dict[str, set]) -> set:
    pred = rule.head_predicate
    args = rule.head_args
    if len(args) == 1:
        t = args[0]
        if not t.var:
            return {t.name} if world.lookup(t.name, pred) is not None else set()
        if t.name not in sets:
            return set(world.elements_with(pred))
        return {n for n in sets[t.name] if world.lookup(n, pred) is not None}
    ta, tb = args
    graph = world.graph
    sa = sets.get(ta.name) if ta.var else {ta.name}
    sb = sets.get(tb.name) if tb.var else {tb.name}
    if ta.var and tb.var and ta.name == tb.name:
        sb = sa
    if sa is not None:
        cand = ((x, y) for x in sa for y in graph.successors(x))
    elif sb is not None:
        cand = ((x, y) for y in sb for x in graph.predecessors(y))
    else:
        return set(world.elements_with(pred))
    return {e for e in cand if (sb is None or e[1] in sb) and world.lookup(e, pred) is not None}


def _head_binding(rule: Rule, element):
    values = (element,) if len(rule.head_args) == 1 else element
    binding = {}
    for term, value in zip(rule.head_args, values):
        if not term.var:
            if term.name != value:
                return None
        elif binding.setdefault(term.name, value) != value:
            return None
    return binding


def _head_candidates(rule: Rule, world: World):
    args = rule.head_args
    pred = rule.head_predicate
    if len(args) == 1:
        t = args[0]
        if not t.var:
            return [(t.name, {})] if world.lookup(t.name, pred) is not None else []
        return [(n, {t.name: n}) for n in world.elements_with(pred)]
    ta, tb = args
    out = []
    for e in world.elements_with(pred):
        binding = {}
        ok = True
        for term, value in ((ta, e[0]), (tb, e[1])):
            if not term.var:
                ok = ok and term.name == value
            elif binding.get(term.name, value) != value:
                ok = False
            else:
                binding[term.name] = value
        if ok:
            out.append((e, binding))
    return out


def _sorted_elements(found) -> tuple:
    # one clause yields only nodes or only edges, so plain ordering matches element_sort_key
    if len(found) <= 1:
        return tuple(found)
    return tuple(sorted(found))


def _evaluate(plan: _Plan, world: World, head_element, head_binding: dict, t: int):
    rule = plan.rule
    specs = plan.specs
    data = world._data
    bindings = [head_binding]
    stage_lists: dict[int, dict] = {}
    for ci in plan.order:
        s = specs[ci]
        thr = s.threshold
        lo, hi, negated = s.lo, s.hi, s.negated
        survivors = []
        satisfied: dict = {}
        basis_all = set() if thr is not None and thr.basis == "all" else None
        mode = s.mode
        if mode == "u_known" and basis_all is None:
            # the hot path: a unary check on an already bound constant
            pred, var, name = s.predicate, s.a_var, s.a
            for b in bindings:
                element = b[name] if var else name
                slot = data.get(element)
                iv = slot.get(pred) if slot is not None else None
                if iv is None:
                    continue
                if negated:
                    iv = negate(iv)
                if iv.lower < lo or iv.upper > hi:
                    continue
                satisfied[element] = iv
                survivors.append(b)
            candidates_done = True
        elif (mode == "b_in" or mode == "b_out") and not s.is_rel:
            # walk in- or out-edges of the bound endpoint
            pred = s.predicate
            graph = world.graph
            if mode == "b_in":
                known_var, known, name, step_fn = s.b_var, s.b, s.a, graph.predecessors
            else:
                known_var, known, name, step_fn = s.a_var, s.a, s.b, graph.successors
            for b in bindings:
                anchor = b[known] if known_var else known
                for other in step_fn(anchor):
                    element = (other, anchor) if mode == "b_in" else (anchor, other)
                    slot = data.get(element)
                    if slot is None:
                        continue
                    iv = slot.get(pred)
                    if iv is None:
                        continue
                    if basis_all is not None:
                        basis_all.add(element)
                    if negated:
                        iv = negate(iv)
                    if iv.lower < lo or iv.upper > hi:
                        continue
                    satisfied[element] = iv
                    nb = dict(b)
                    nb[name] = other
                    survivors.append(nb)
            candidates_done = True
        else:
            candidates_done = False
        for b in (() if candidates_done else bindings):
            for element, ext, iv in _candidates(world, s, b):
                if basis_all is not None:
                    basis_all.add(element)
                if negated:
                    iv = negate(iv)
                if iv.lower < lo or iv.upper > hi:
                    continue
                satisfied[element] = iv
                survivors.append(b if ext is None else {**b, **ext})
        if thr is not None:
            basis = len(basis_all) if basis_all is not None else len(bindings)
            if len(satisfied) < thr.required(basis):
                return None
            stage_lists[ci] = satisfied
        elif not survivors:
            return None
        bindings = survivors

    groundings = []
    captured: dict[str, list[Interval]] = {}
    for s in specs:
        clause = s.clause
        if s.index in stage_lists:
            found = stage_lists[s.index]
        else:
            found = {}
            for b in bindings:
                element = s.element(b)
                if element not in found:
                    iv = _value(world, element, s.predicate)
                    found[element] = negate(iv) if s.negated else iv
        groundings.append(_sorted_elements(found))
        if clause.binder is not None:
            ranked = sorted(found.items(), key=lambda kv: (-kv[1].lower, element_sort_key(kv[0])))
            if s.threshold is not None and s.threshold.mode == "count":
                ranked = ranked[: int(s.threshold.value)]
            captured[clause.binder] = [iv for _, iv in ranked]

    bound = rule.constant_head
    if bound is None:
        lowers = {k: [iv.lower for iv in v] for k, v in captured.items()}
        uppers = {k: [iv.upper for iv in v] for k, v in captured.items()}
        try:
            lo = rule.lower.evaluate(lowers)
            hi = rule.upper.evaluate(uppers)
        except ArityMismatch as exc:
            log.debug("rule %s skipped for %s: %s", rule.id, head_element, exc)
            return None
        bound = make_interval(lo, hi, f"head of {rule.id}")
    flat = tuple(iv for clause in rule.clauses if clause.binder is not None for iv in captured[clause.binder])
    return GroundRuleInstance(rule.id, (head_element, rule.head_predicate), bound, tuple(groundings), flat,
                              t + rule.delta_t)


def ground_rule(rule: Rule, world: World, graph: KnowledgeGraph | None = None) -> list[GroundRuleInstance]:
    """Every head grounding whose body is satisfied in ``world`` (at ``world.current_time``).

    ``graph`` defaults to the world's own graph and is accepted for symmetry
    with callers that hold it separately.
    """
    if graph is not None and graph is not world.graph:
        raise ValueError("world was built over a different graph")
    plan = _plan(rule)
    out = []
    for element, binding in _head_candidates(rule, world):
        inst = _evaluate(plan, world, element, binding, world.current_time)
        if inst is not None:
            out.append(inst)
    return out


# -- updates --------------------------------------------------------------------

def update_interpretation(world: World, key, incoming: Interval, registry: PredicateRegistry | None = None,
                          epsilon: float = EPSILON, changes: list | None = None, base: Interval | None = None) -> bool:
    """Tighten ``key`` with ``incoming`` and push the negation onto complement partners.

    ``base`` replaces the current value as the starting point (used when a
    value carried over from an earlier timestep is superseded).  Changed keys
    are appended to ``changes`` as ``(key, old, new)``.
    """
    if world.is_static(key):
        raise StaticWriteAttempt(f"attempt to update static atom {format_key(key)}")
    registry = registry or world.registry
    old = world.get(*key)
    new = tighten(old if base is None else base, incoming)
    if not moved(old, new, epsilon):
        world.set(key, old)  # refresh the write stamp only
        return False
    world.set(key, new)
    if changes is not None:
        changes.append((key, old, new))
    element, predicate = key
    for partner in registry.partners(predicate):
        pkey = (element, partner)
        if pkey not in world or world.is_static(pkey):
            continue
        pold = world.get(*pkey)
        want = negate(new)
        if not check_consistent(pold, want):
            if world.stamp(pkey) < world.current_time:
                pold_base = BOTTOM
            else:
                resolve_inconsistency(world, pkey, registry, changes)
                continue
        else:
            pold_base = pold
        pnew = tighten(pold_base, want)
        if moved(pold, pnew, epsilon):
            world.set(pkey, pnew)
            if changes is not None:
                changes.append((pkey, pold, pnew))
    return True


def resolve_inconsistency(world: World, key, registry: PredicateRegistry | None = None,
                          changes: list | None = None) -> None:
    """Reset ``key`` and its complement partners to [0, 1] and freeze them."""
    registry = registry or world.registry
    element, predicate = key
    targets = [key] + [(element, p) for p in registry.partners(predicate)]
    for k in targets:
        if k not in world or world.is_static(k):
            continue
        old = world.get(*k)
        world.set(k, BOTTOM, static=True)
        if changes is not None:
            changes.append((k, old, BOTTOM))


def _base(world: World, key, incoming: Interval):
    """Starting point for an update, or None on a genuine conflict.

    A conflicting value that was last written in an earlier timestep is
    superseded; only values written during the current timestep conflict.
    """
    current = world.get(*key)
    if check_consistent(current, incoming):
        return current
    if world.stamp(key) < world.current_time:
        return BOTTOM
    return None


def query_entailment(world: World, key, bound: Interval, negated: bool = False) -> bool:
    """Whether the stored (or negated) interval of ``key`` is at least as tight as ``bound``."""
    value = world.get(*key)
    if negated:
        value = negate(value)
    return bound.leq(value)


# -- the engine -----------------------------------------------------------------

@dataclass
class StepStats:
    t: int
    passes: int = 0
    instances: int = 0
    changes: int = 0


@dataclass
class Engine:
    world: World
    rules: list[Rule]
    queue: FactQueue
    config: EngineConfig
    trace: Trace = field(default_factory=Trace)
    stats: list[StepStats] = field(default_factory=list)

    def __post_init__(self):
        self._order = {r.id: natural_key(r.id) for r in self.rules}
        self._delay = {r.id: r.delta_t for r in self.rules}
        self._plans = [_plan(r) for r in self.rules]
        self._rng = random.Random(self.config.shuffle_seed) if self.config.shuffle_seed is not None else None
        self._pool = ThreadPoolExecutor(self.config.workers) if self.config.workers > 1 else None
        # per rule: head element -> last firing instance; kept in sync through the changed-key log
        self._cache: list[dict] = [{} for _ in self._plans]
        self._dirty: dict[str, set] = {}
        self._full = True

    @property
    def cap(self) -> int:
        if self.config.max_inner_iterations is not None:
            return self.config.max_inner_iterations
        return max(100, 100 * len(self.world))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    # grounding phase: reads the world only, may fan out over rules
    def _ground_all(self, t: int, first: bool) -> list[tuple]:
        """``(sort key, instance)`` pairs to act on in this pass, in canonical order.

        The first pass of a timestep returns every firing instance; later
        passes return only those re-evaluated because something they read
        changed, since re-applying an unchanged instance is a no-op.  Cached
        instances keep the ``fire_time`` of their evaluation; callers use the
        rule's delay instead.
        """
        world = self.world
        dirty = self._dirty
        full = self._full or not self.config.incremental

        def one(idx):
            plan = self._plans[idx]
            cache = self._cache[idx]
            rule = plan.rule
            if full:
                cache.clear()
                heads = _head_candidates(rule, world)
            else:
                affected = _affected_heads(plan, world, dirty)
                if affected is None:
                    heads = _head_candidates(rule, world)
                else:
                    heads = [(e, b) for e in affected if (b := _head_binding(rule, e)) is not None]
            fresh = []
            for element, binding in heads:
                inst = _evaluate(plan, world, element, binding, t)
                if inst is None:
                    cache.pop(element, None)
                else:
                    item = ((self._order[rule.id], key_sort_key(inst.head_key)), inst)
                    cache[element] = item
                    fresh.append(item)
            return fresh if not first else list(cache.values())

        indices = range(len(self._plans))
        if self._pool is not None and len(self._plans) > 1:
            chunks = list(self._pool.map(one, indices))
        else:
            chunks = [one(i) for i in indices]
        self._dirty = {}
        self._full = False
        items = [item for chunk in chunks for item in chunk]
        if self._rng is not None:
            self._rng.shuffle(items)
        items.sort(key=lambda item: item[0])
        return items

    def _mark(self, keys) -> None:
        for element, predicate in keys:
            self._dirty.setdefault(predicate, set()).add(element)

    # apply phase: single writer
    def _apply(self, updates: list[QueuedUpdate], t: int, gamma: int, entries: list[TraceEntry]) -> set:
        world = self.world
        registry = world.registry
        eps = self.config.epsilon
        touched = set()
        data = world._data
        static_keys = world._static
        stamps = world._stamp
        for u in updates:
            key = u.key
            if key in static_keys:
                continue
            element, predicate = key
            current = data[element][predicate]
            incoming = u.bound
            if current.lower >= incoming.lower and current.upper <= incoming.upper:
                # already at least as tight: nothing moves, the value just counts as written now
                stamps[key] = t
                continue
            base = _base(world, key, u.bound)
            conflict = base is None
            if not conflict:
                want = negate(tighten(base, u.bound))
                for partner in registry.partners(predicate):
                    pkey = (element, partner)
                    if pkey in world and not world.is_static(pkey) and _base(world, pkey, want) is None:
                        conflict = True
                        break
            changes: list = []
            if conflict:
                if self.config.inconsistency_policy == "halt":
                    raise InconsistencyHalt(key, world.get(*key), u.bound, t)
                resolve_inconsistency(world, key, registry, changes)
                detail = f"incoming {u.bound} from {u.cause}"
                for k, old, new in changes:
                    entries.append(TraceEntry(t, gamma, k[0], k[1], old, new, RESOLUTION, u.groundings,
                                              static=True, detail=detail))
                    touched.add(k)
                continue
            update_interpretation(world, key, u.bound, registry, eps, changes, base=base)
            for k, old, new in changes:
                static = world.is_static(k)
                if static:
                    cause, detail = RESOLUTION, f"complement of {format_key(key)} from {u.cause}"
                elif k != key:
                    cause, detail = u.cause, f"complement of {format_key(key)}"
                else:
                    cause, detail = u.cause, ""
                entries.append(TraceEntry(t, gamma, k[0], k[1], old, new, cause, u.groundings,
                                          static=static, detail=detail))
                touched.add(k)
        self._mark(touched)
        return touched

    def step(self, t: int) -> list[TraceEntry]:
        world = self.world
        world.current_time = t
        if self.config.persistence_mode == "reset" and t > 0:
            self._mark(world.reset_nonstatic())
        stats = StepStats(t)
        entries: list[TraceEntry] = []
        gamma = 1
        self._apply(self.queue.pop(t), t, gamma, entries)
        passes = 0
        while True:
            items = self._ground_all(t, first=passes == 0)
            passes += 1
            stats.instances += len(items)
            immediate = []
            horizon = self.config.horizon
            for (rank, head_rank), inst in items:
                fire = t + self._delay[inst.rule_id]
                if fire > horizon:
                    continue
                update = QueuedUpdate(inst.head_key, inst.bound, inst.rule_id, (1, t, gamma, rank, head_rank),
                                      inst.clause_groundings)
                if fire == t:
                    immediate.append(update)
                else:
                    self.queue.push(fire, update, dedupe=False)
            if not immediate:
                break
            gamma += 1
            changed = self._apply(immediate, t, gamma, entries)
            if not changed:
                break
            if passes >= self.cap:
                raise IterationCapExceeded(t, self.cap, sorted((format_key(k) for k in changed)))
        stats.passes = passes
        stats.changes = len(entries)
        self.stats.append(stats)
        self.trace.extend(entries)
        return entries


def prepare(graph: KnowledgeGraph, registry: PredicateRegistry, rules, facts, config: EngineConfig) -> Engine:
    """Build the initial world, apply static facts and queue the rest."""
    world = init_world(graph, registry)
    queue = schedule_facts(world, graph_facts(graph) + list(facts), config.horizon)
    trace = Trace(config.persistence_mode, config.horizon)
    for change in queue.initial:
        element, predicate = change.key
        trace.record(TraceEntry(0, 0, element, predicate, change.old, change.new, change.cause,
                                static=True, detail=change.detail))
    return Engine(world, list(rules), queue, config, trace)


def initial_world(graph: KnowledgeGraph, registry: PredicateRegistry) -> World:
    """The all-unknown world a run starts from; the reference point for ``replay``."""
    return init_world(graph, registry)


def step(world: World, t: int, rules, fact_queue: FactQueue, config: EngineConfig,
         trace: Trace | None = None) -> list[TraceEntry]:
    """Run timestep ``t`` on ``world`` in place and return its trace entries."""
    engine = Engine(world, list(rules), fact_queue, config, trace if trace is not None else Trace())
    try:
        return engine.step(t)
    finally:
        engine.close()


def run(graph: KnowledgeGraph, registry: PredicateRegistry, rules, facts: list[Fact],
        config: EngineConfig | None = None, on_step=None, engine_out: list | None = None):
    """Evaluate the program for t = 0..horizon; returns ``(world, trace)``.

    ``on_step(t, world, entries)`` is called after every timestep.
    """
    config = config or EngineConfig()
    engine = prepare(graph, registry, rules, facts, config)
    if engine_out is not None:
        engine_out.append(engine)
    try:
        for t in range(config.horizon + 1):
            entries = engine.step(t)
            if on_step is not None:
                on_step(t, engine.world, entries)
    finally:
        engine.close()
    return engine.world, engine.trace
