"""Build a program from text instead of bundled files.

A buyer's risk is the average of its two riskiest suppliers' lower bounds.
"""
from annolog.engine import EngineConfig, run
from annolog.graphml import load_graph
from annolog.model import load_registry, parse_facts
from annolog.rules import parse_rules

GRAPH = """<?xml version="1.0"?>
<graphml xmlns="http://graphml.graphdrawing.org/xmlns">
  <graph edgedefault="directed">
    <node id="mine"/><node id="smelter"/><node id="mill"/><node id="factory"/>
    <edge source="mine" target="factory"/><edge source="smelter" target="factory"/>
    <edge source="mill" target="factory"/>
  </graph>
</graphml>
"""

REGISTRY = """# annolog-v1
unary: [risk]
"""

RULES = """# annolog-v1
spread :: risk(B) : [avg(x),1] <-1 rel(S,B):[1,1], exists(2) risk(S):[x,1]
"""

FACTS = """# annolog-v1
- {element: mine, predicate: risk, lower: 0.9, upper: 1.0}
- {element: smelter, predicate: risk, lower: 0.5, upper: 1.0}
"""


def main():
    graph = load_graph(GRAPH)
    registry = load_registry(REGISTRY)
    rules = parse_rules(RULES, registry)
    facts = parse_facts(FACTS)
    world, trace = run(graph, registry, rules, facts, EngineConfig(horizon=2))
    for e in trace:
        print(e.t, e.element, e.predicate, e.new_bound, e.cause)
    print("factory risk:", world.get("factory", "risk"))


if __name__ == "__main__":
    main()
