"""Seeded random programs small enough for the brute-force oracle.

Derived heads only ever carry upper bound 1 and every atom gets at most one
fact, so no program can hit a genuine conflict; the oracle leaves conflict
resolution to the hand-written examples.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from annolog.lattice import Interval
from annolog.model import Fact, KnowledgeGraph, PredicateRegistry
from annolog.rules import parse_rules

UNARY = ("p", "q", "r")
BINARY = ("e", "f")
GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
THRESHOLDS = ("forall", "exists(1)", "exists(2)", "exists(50%)", "exists(50%,prev)", "exists(0.3)")
FUNCTIONS = ("avg", "max", "min")


@dataclass
class RandomProgram:
    graph: KnowledgeGraph
    registry: PredicateRegistry
    rules: list
    facts: list
    horizon: int
    text: str

    def atom_count(self) -> int:
        g = self.graph
        return len(g.nodes) * len(UNARY) + len(g.edges) * (len(BINARY) + 1)


def _interval(rng, upper_one=False):
    lo = rng.choice(GRID + (1.0, 0.75))
    if upper_one:
        return lo, 1.0
    hi = rng.choice([x for x in GRID if x >= lo])
    return lo, hi


def _num(x):
    return str(int(x)) if float(x).is_integer() else repr(x)


def _clause(rng, known, fresh_name, nodes):
    pred = rng.choice(UNARY + BINARY + ("rel", "g"))
    known_list = sorted(known)
    if pred in UNARY:
        arg = rng.choice(known_list) if rng.random() < 0.9 else rng.choice(nodes)
        args = [arg]
        introduced = []
    else:
        anchor = rng.choice(known_list)
        r = rng.random()
        if r < 0.55:
            other, introduced = fresh_name, [fresh_name]
        elif r < 0.9:
            other, introduced = rng.choice(known_list), []
        else:
            other, introduced = rng.choice(nodes), []
        args = [anchor, other] if rng.random() < 0.5 else [other, anchor]
    return pred, args, introduced


def _rule(rng, idx, nodes):
    head_pred = rng.choice(UNARY + BINARY)
    head_vars = ["X"] if head_pred in UNARY else ["X", "Y"]
    if head_pred in BINARY and rng.random() < 0.1:
        head_vars = ["X", "X"]
    known = set(head_vars)
    clauses = []
    binders = []
    n_clauses = rng.randint(1, 3)
    counter = 0
    for _ in range(n_clauses):
        counter += 1
        pred, args, introduced = _clause(rng, known, f"Z{counter}", nodes)
        known.update(introduced)
        text = f"{pred}({','.join(args)})"
        if pred != "rel" and rng.random() < 0.2:
            text = "~" + text
        if rng.random() < 0.3:
            text = rng.choice(THRESHOLDS) + " " + text
        if pred != "rel" and rng.random() < 0.25 and len(binders) < 2:
            name = f"a{len(binders)}"
            binders.append(name)
            text += f":[{name},1]"
        else:
            lo, hi = rng.choice([(1.0, 1.0), (0.5, 1.0), (0.5, 1.0), (0.0, 1.0), (0.0, 1.0), (0.0, 0.5), _interval(rng)])
            text += f":[{_num(lo)},{_num(hi)}]"
        clauses.append(text)
    # every head variable must occur in the body
    used = " ".join(clauses)
    for v in dict.fromkeys(head_vars):
        if f"({v}" not in used and f",{v})" not in used and f"({v})" not in used:
            clauses.append(f"{rng.choice(UNARY)}({v}):[0,1]")
    if binders and rng.random() < 0.8:
        lower = f"{rng.choice(FUNCTIONS)}({','.join(binders)})"
    else:
        lower = _num(rng.choice(GRID[1:]))
    dt = rng.choice((0, 0, 1, 2))
    head = f"{head_pred}({','.join(head_vars)})"
    return f"rule_{idx} :: {head} : [{lower},1] <-{dt} " + ", ".join(clauses)


def random_program(seed: int) -> RandomProgram:
    rng = random.Random(seed)
    n = rng.randint(2, 5)
    nodes = [f"n{i}" for i in range(n)]
    pairs = [(a, b) for a in nodes for b in nodes]
    edges = rng.sample(pairs, rng.randint(min(len(pairs), 3), min(len(pairs), 7)))
    edge_attrs = {e: {"g": Interval(*_interval(rng))} for e in edges if rng.random() < 0.7}
    graph = KnowledgeGraph(nodes, edges, edge_attributes=edge_attrs)
    registry = PredicateRegistry(unary=set(UNARY), binary=set(BINARY) | {"g"}, static_predicates={"g"})
    horizon = rng.randint(1, 5)
    lines = ["# annolog-v1"] + [_rule(rng, i + 1, nodes) for i in range(rng.randint(1, 6))]
    text = "\n".join(lines) + "\n"
    rules = parse_rules(text, registry)
    heads = {r.head_predicate for r in rules}
    keys = [(v, p) for p in UNARY for v in nodes] + [(e, p) for p in BINARY for e in edges]
    facts = []
    for i, (element, pred) in enumerate(rng.sample(keys, rng.randint(min(len(keys), 4), min(len(keys), 16)))):
        lo, hi = _interval(rng, upper_one=pred in heads)
        static = rng.random() < 0.15
        start = rng.randint(0, horizon)
        end = rng.randint(start, horizon)
        facts.append(Fact(element, pred, Interval(lo, hi), static=static, t_start=0 if static else start,
                          t_end=None if static else end, id=f"f{i}"))
    return RandomProgram(graph, registry, rules, facts, horizon, text)
