"""Seeded synthetic knowledge graphs for demos and benchmarks.

Every topology produces exactly ``round(density * nodes**2)`` edges, so a
density ladder maps onto predictable edge counts.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidSpec
from .lattice import TRUE, Interval
from .model import KnowledgeGraph

TOPOLOGIES = ("buyer-supplier-dag", "social-smallworld", "uniform-random")
PETS = ("cat", "dog", "bird", "fish", "hamster")


@dataclass
class SynthSpec:
    nodes: int
    density: float
    seed: int = 0
    topology: str = "uniform-random"
    # type -> predicate -> (probability, lower bound); a hit gives the node [lower, 1]
    attribute_profiles: dict[str, dict[str, tuple[float, float]]] = field(default_factory=dict)
    tiers: int = 10

    def __post_init__(self):
        if self.topology not in TOPOLOGIES:
            raise InvalidSpec(f"unknown topology {self.topology!r}; choose from {', '.join(TOPOLOGIES)}")
        if self.nodes < 1:
            raise InvalidSpec("nodes must be >= 1")
        if not 0.0 < self.density <= 1.0:
            raise InvalidSpec("density must lie in (0, 1]")
        for profile in self.attribute_profiles.values():
            for pred, (p, lower) in profile.items():
                if not (0.0 <= p <= 1.0 and 0.0 <= lower <= 1.0):
                    raise InvalidSpec(f"profile for {pred} needs probability and bound in [0, 1]")

    @property
    def edge_count(self) -> int:
        return round(self.density * self.nodes ** 2)


def _pairs(rng, n_src, n_dst, count, ok, what):
    """``count`` distinct (i, j) index pairs accepted by ``ok``; dense requests enumerate, sparse ones reject."""
    space = n_src * n_dst
    if space <= 4_000_000 or count > space // 4:
        i, j = np.divmod(np.arange(space, dtype=np.int64), n_dst)
        keep = ok(i, j)
        i, j = i[keep], j[keep]
        if count > len(i):
            raise InvalidSpec(f"{what}: {count} edges requested but only {len(i)} are possible")
        pick = np.sort(rng.choice(len(i), size=count, replace=False))
        return list(zip(i[pick].tolist(), j[pick].tolist()))
    seen: set = set()
    out = []
    while len(out) < count:
        batch = max(1024, 2 * (count - len(out)))
        i = rng.integers(0, n_src, size=batch)
        j = rng.integers(0, n_dst, size=batch)
        keep = ok(i, j)
        for a, b in zip(i[keep].tolist(), j[keep].tolist()):
            if (a, b) not in seen:
                seen.add((a, b))
                out.append((a, b))
                if len(out) == count:
                    break
    return sorted(out)


def _ids(prefix, n):
    width = len(str(max(n - 1, 0)))
    return [f"{prefix}{i:0{width}d}" for i in range(n)]


def _apply_profiles(spec, rng, nodes, node_types):
    attrs: dict[str, dict[str, Interval]] = {}
    for n in nodes:
        profile = spec.attribute_profiles.get(node_types.get(n, ""), {})
        for pred in sorted(profile):
            p, lower = profile[pred]
            if rng.random() < p:
                attrs.setdefault(n, {})[pred] = Interval(float(lower), 1.0)
    return attrs


def _dag(spec, rng):
    n = spec.nodes
    tiers = max(1, min(spec.tiers, n))
    tier = (np.arange(n) * tiers) // n
    nodes = _ids("c", n)
    pairs = _pairs(rng, n, n, spec.edge_count, lambda i, j: tier[i] < tier[j], "buyer-supplier-dag")
    edges = [(nodes[i], nodes[j]) for i, j in pairs]
    types = {v: "company" for v in nodes}
    edge_attrs = {e: {"supplies": TRUE} for e in edges}
    return nodes, edges, types, edge_attrs


def _smallworld(spec, rng):
    n = spec.nodes
    n_pets = min(len(PETS), max(1, n // 20)) if n > 2 else 0
    people = _ids("p", n - n_pets)
    pets = list(PETS[:n_pets])
    total = spec.edge_count
    n_pet_edges = min(len(people), total // 4) if pets else 0
    owners = sorted(rng.choice(len(people), size=n_pet_edges, replace=False).tolist()) if n_pet_edges else []
    pet_edges = [(people[o], pets[int(rng.integers(0, n_pets))]) for o in owners]
    n_friend = total - n_pet_edges
    m = len(people)
    if n_friend > m * (m - 1):
        raise InvalidSpec(f"social-smallworld: {n_friend} friend edges requested but only {m * (m - 1)} possible")
    # ring lattice with random rewiring, reciprocated
    undirected: set = set()
    order = []

    def add(a, b):
        key = (min(a, b), max(a, b))
        if a != b and key not in undirected:
            undirected.add(key)
            order.append(key)
            return True
        return False

    want = n_friend // 2
    hop = 1
    while len(order) < want and hop < m:
        for i in range(m):
            if len(order) >= want:
                break
            j = (i + hop) % m
            if rng.random() < 0.1:
                j = int(rng.integers(0, m))
            if not add(i, j):
                add(i, (i + hop) % m)
        hop += 1
    while len(order) < want:
        add(int(rng.integers(0, m)), int(rng.integers(0, m)))
    friend = set()
    for a, b in order:
        friend.add((a, b))
        friend.add((b, a))
    while len(friend) < n_friend:
        a, b = int(rng.integers(0, m)), int(rng.integers(0, m))
        if a != b:
            friend.add((a, b))
    friend_edges = [(people[a], people[b]) for a, b in sorted(friend)]
    nodes = people + pets
    types = {v: "person" for v in people}
    types.update({v: "pet" for v in pets})
    edge_attrs = {e: {"friend": TRUE} for e in friend_edges}
    edge_attrs.update({e: {"hasPet": TRUE} for e in pet_edges})
    return nodes, friend_edges + pet_edges, types, edge_attrs


def _uniform(spec, rng):
    n = spec.nodes
    nodes = _ids("n", n)
    pairs = _pairs(rng, n, n, spec.edge_count, lambda i, j: i != j, "uniform-random")
    edges = [(nodes[i], nodes[j]) for i, j in pairs]
    types = {v: "node" for v in nodes}
    edge_attrs = {e: {"link": TRUE} for e in edges}
    return nodes, edges, types, edge_attrs


def generate(spec: SynthSpec) -> KnowledgeGraph:
    rng = np.random.default_rng(spec.seed)
    build = {"buyer-supplier-dag": _dag, "social-smallworld": _smallworld, "uniform-random": _uniform}
    nodes, edges, types, edge_attrs = build[spec.topology](spec, rng)
    node_attrs = _apply_profiles(spec, rng, nodes, types)
    return KnowledgeGraph(nodes, edges, node_attrs, edge_attrs, types)


def tier_of(spec: SynthSpec, index: int) -> int:
    tiers = max(1, min(spec.tiers, spec.nodes))
    return (index * tiers) // spec.nodes


def expected_edges(nodes: int, density: float) -> int:
    return round(density * nodes ** 2)

