"""Bundled programs: the student example, the conflict example and two diffusion scenarios."""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .engine import EngineConfig, run
from .graphml import load_graph
from .lattice import TRUE, Interval
from .model import Fact, KnowledgeGraph, PredicateRegistry, load_registry, parse_facts
from .rules import Rule, parse_rules
from .synth import SynthSpec, generate, tier_of

DEMOS = ("students", "disruption", "relevance")
STUDENTS = ("john", "mary", "phil")
CLASSES = ("math", "english")


def data_text(name: str) -> str:
    return resources.files("annolog").joinpath("data").joinpath(name).read_text(encoding="utf-8")


def data_path(name: str):
    return resources.files("annolog").joinpath("data").joinpath(name)


@dataclass
class Program:
    graph: KnowledgeGraph
    registry: PredicateRegistry
    rules: list[Rule]
    facts: list[Fact]
    horizon: int
    persistence_mode: str = "persistent"

    def config(self, **overrides) -> EngineConfig:
        opts = {"horizon": self.horizon, "persistence_mode": self.persistence_mode}
        opts.update(overrides)
        return EngineConfig(**opts)

    def run(self, **overrides):
        return run(self.graph, self.registry, self.rules, self.facts, self.config(**overrides))


def students() -> Program:
    registry = load_registry(data_text("students_registry.yaml"))
    return Program(load_graph(data_text("students.graphml")), registry,
                   parse_rules(data_text("students.rules"), registry),
                   parse_facts(data_text("students_facts.yaml")), horizon=5)


def conflict() -> Program:
    """Two classmates become friends while a fact says they are not."""
    registry = load_registry(data_text("students_registry.yaml"))
    return Program(load_graph(data_text("students.graphml")), registry,
                   parse_rules(data_text("conflict.rules"), registry),
                   parse_facts(data_text("conflict_facts.yaml")), horizon=5)


def type_check_graph() -> tuple[KnowledgeGraph, PredicateRegistry, PredicateRegistry]:
    """Every ordered pair of the five student-demo constants as an edge.

    Returns the graph plus a ``takes``-only registry with and without its
    (student, class) constraint.
    """
    names = STUDENTS + CLASSES
    types = {n: "student" for n in STUDENTS} | {n: "class" for n in CLASSES}
    graph = KnowledgeGraph(names, [(a, b) for a in names for b in names], node_types=types)
    constrained = PredicateRegistry(binary={"takes"}, type_constraints={"takes": ("student", "class")})
    free = PredicateRegistry(binary={"takes"})
    return graph, constrained, free


def disruption(nodes: int = 1000, density: float = 0.003, seed: int = 7, horizon: int = 40,
               full_fraction: float = 0.2, partial_fraction: float = 0.1) -> Program:
    """Seeded buyer-supplier DAG; part of the first tier starts disrupted, some of it only partly."""
    spec = SynthSpec(nodes, density, seed, "buyer-supplier-dag")
    graph = generate(spec)
    registry = load_registry(data_text("disruption_registry.yaml"))
    rng = np.random.default_rng(seed + 1)
    first_tier = [i for i in range(nodes) if tier_of(spec, i) == 0]
    facts = []
    for i in first_tier:
        r = rng.random()
        if r < full_fraction:
            facts.append(Fact(graph.nodes[i], "disrupted", TRUE, id="seed_full"))
        elif r < full_fraction + partial_fraction:
            facts.append(Fact(graph.nodes[i], "disrupted", Interval(0.5, 1.0), id="seed_partial"))
    return Program(graph, registry, parse_rules(data_text("disruption.rules"), registry), facts, horizon)


def relevance(nodes: int = 300, density: float = 0.02, seed: int = 11, horizon: int = 8,
              customer_fraction: float = 0.03) -> Program:
    """Social small world; customers are fixed as fully relevant and relevance spreads to friends."""
    spec = SynthSpec(nodes, density, seed, "social-smallworld",
                     attribute_profiles={"person": {"customer": (customer_fraction, 1.0)}})
    graph = generate(spec)
    registry = load_registry(data_text("relevance_registry.yaml"))
    facts = [Fact(n, "relevance", TRUE, static=True, id="customer")
             for n in graph.nodes if "customer" in graph.node_attributes.get(n, {})]
    return Program(graph, registry, parse_rules(data_text("relevance.rules"), registry), facts, horizon)


def relevance_chain() -> Program:
    """A customer with a cat, a friend with a cat, and that friend's friend with a dog."""
    people = ["c", "a", "b"]
    edges = [("a", "c"), ("c", "a"), ("b", "a"), ("a", "b"), ("c", "cat"), ("a", "cat"), ("b", "dog")]
    attrs = {e: {"friend": TRUE} for e in edges[:4]}
    attrs.update({e: {"hasPet": TRUE} for e in edges[4:]})
    types = {p: "person" for p in people} | {"cat": "pet", "dog": "pet"}
    graph = KnowledgeGraph(people + ["cat", "dog"], edges, edge_attributes=attrs, node_types=types)
    registry = load_registry(data_text("relevance_registry.yaml"))
    facts = [Fact("c", "relevance", TRUE, static=True, id="customer")]
    return Program(graph, registry, parse_rules(data_text("relevance.rules"), registry), facts, horizon=3)


def count_classes(world, predicate: str) -> dict[str, int]:
    """How many atoms of ``predicate`` are true [1,1], false [0,0], partial or unknown [0,1]."""
    counts = {"true": 0, "false": 0, "partial": 0, "unknown": 0}
    for element in world.elements_with(predicate):
        iv = world.get(element, predicate)
        if iv.lower == 1.0:
            counts["true"] += 1
        elif iv.upper == 0.0:
            counts["false"] += 1
        elif iv.lower == 0.0 and iv.upper == 1.0:
            counts["unknown"] += 1
        else:
            counts["partial"] += 1
    return counts


def timeline(program: Program, predicate: str, **overrides) -> list[dict[str, int]]:
    """Per-timestep counts of ``predicate`` over a whole run."""
    rows = []

    def record(t, world, entries):
        rows.append({"t": t, **count_classes(world, predicate)})

    cfg = program.config(**overrides)
    run(program.graph, program.registry, program.rules, program.facts, cfg, on_step=record)
    return rows


def converged_at(rows: list[dict], key: str = "true", quiet: int = 2) -> int | None:
    """First t after which ``key`` stays unchanged for ``quiet`` consecutive steps."""
    for i in range(len(rows) - quiet):
        if all(rows[i + j + 1][key] == rows[i][key] for j in range(quiet)):
            return rows[i]["t"]
    return None
