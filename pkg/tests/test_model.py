import itertools

import pytest

from annolog import demos
from annolog.errors import BadAnnotation, DanglingEdge, ParseError, RangeError, UnknownAtom, UnknownType
from annolog.graphml import load_graph, write_graph
from annolog.lattice import BOTTOM, FALSE, TRUE, Interval
from annolog.model import (
    Fact,
    KnowledgeGraph,
    PredicateRegistry,
    compatible,
    dump_facts,
    init_world,
    load_registry,
    parse_facts,
    schedule_facts,
)
from annolog.synth import SynthSpec, generate

EMPTY_GRAPHML = '<?xml version="1.0"?><graphml xmlns="http://graphml.graphdrawing.org/xmlns"></graphml>'


def graphml(body, keys=""):
    return ('<?xml version="1.0"?><graphml xmlns="http://graphml.graphdrawing.org/xmlns">'
            f'{keys}<graph edgedefault="directed">{body}</graph></graphml>')


class TestLoadGraph:
    def test_student_graph(self):
        g = load_graph(demos.data_text("students.graphml"))
        assert len(g.nodes) == 5
        assert ("john", "math") in g.edges
        assert g.node_types["english"] == "class"

    def test_empty_document(self):
        g = load_graph(EMPTY_GRAPHML)
        assert g.nodes == [] and g.edges == []

    def test_out_of_range_attribute(self):
        doc = graphml('<node id="a"><data key="d0">1.3</data></node>',
                      '<key id="d0" for="node" attr.name="risk" attr.type="double"/>')
        with pytest.raises(BadAnnotation):
            load_graph(doc)

    def test_scalar_and_paired_attributes(self):
        keys = ('<key id="d0" for="node" attr.name="risk" attr.type="double"/>'
                '<key id="d1" for="edge" attr.name="trust.lower" attr.type="double"/>'
                '<key id="d2" for="edge" attr.name="trust.upper" attr.type="double"/>')
        body = ('<node id="a"><data key="d0">0.4</data></node><node id="b"/>'
                '<edge source="a" target="b"><data key="d1">0.2</data><data key="d2">0.7</data></edge>')
        g = load_graph(graphml(body, keys))
        assert g.node_attributes["a"]["risk"] == Interval(0.4, 1.0)
        assert g.edge_attributes[("a", "b")]["trust"] == Interval(0.2, 0.7)

    def test_dangling_edge(self):
        with pytest.raises(DanglingEdge):
            load_graph(graphml('<node id="a"/><edge source="a" target="zz"/>'))

    def test_malformed_xml(self):
        with pytest.raises(ParseError):
            load_graph("<graphml><graph>")

    def test_undirected_edges_become_two_arcs(self):
        g = load_graph(graphml('<node id="a"/><node id="b"/><edge source="a" target="b"/>').replace(
            'edgedefault="directed"', 'edgedefault="undirected"'))
        assert set(g.edges) == {("a", "b"), ("b", "a")}

    def test_write_then_load_round_trip(self):
        g = generate(SynthSpec(40, 0.05, seed=3, topology="social-smallworld",
                               attribute_profiles={"person": {"customer": (0.3, 1.0)}}))
        g.edge_attributes[g.edges[0]] = {"trust": Interval(0.25, 0.5)}
        text = write_graph(g)
        back = load_graph(text)
        assert back.nodes == g.nodes and back.edges == g.edges
        assert back.node_attributes == g.node_attributes
        assert back.edge_attributes == g.edge_attributes
        assert back.node_types == g.node_types
        assert write_graph(back) == text


class TestRegistry:
    def test_load(self):
        reg = load_registry(demos.data_text("students_registry.yaml"))
        assert "takes" in reg.binary and "student" in reg.unary
        assert reg.type_constraints["takes"] == ("student", "class")
        assert reg.arity("friend") == 2

    def test_missing_header(self):
        with pytest.raises(ParseError):
            load_registry("unary: [p]\n")

    def test_rel_is_builtin(self):
        reg = PredicateRegistry(unary={"p"})
        assert "rel" in reg.binary and reg.is_static("rel")

    def test_complement_partners(self):
        reg = PredicateRegistry(unary={"bachelor", "married"}, complement_pairs=[("bachelor", "married")])
        assert reg.partners("married") == ["bachelor"]


class TestInitWorld:
    def test_type_constraints_reduce_slots(self):
        graph, constrained, free = demos.type_check_graph()
        assert len(init_world(graph, free)) == 25
        assert len(init_world(graph, constrained)) == 6

    def test_unconstrained_product(self):
        g = generate(SynthSpec(12, 0.1, seed=1))
        reg = PredicateRegistry(unary={"p", "q"}, binary={"e"})
        # the generator also puts a static "link" attribute on every edge
        assert len(init_world(g, reg)) == 12 * 2 + len(g.edges) * 2

    def test_singleton(self):
        g = KnowledgeGraph(["x"], node_types={"x": "t"})
        reg = PredicateRegistry(unary={"p"}, type_constraints={"p": "t"})
        w = init_world(g, reg)
        assert len(w) == 1 and w.get("x", "p") == BOTTOM

    def test_open_world_start(self):
        w = init_world(load_graph(demos.data_text("students.graphml")),
                       load_registry(demos.data_text("students_registry.yaml")))
        assert all(bound == BOTTOM for _, bound in w.items())
        assert w.get(("john", "math"), "rel") == TRUE
        assert w.get(("math", "john"), "rel") == BOTTOM

    def test_slot_count_matches_nested_loop(self):
        graph = load_graph(demos.data_text("students.graphml"))
        reg = load_registry(demos.data_text("students_registry.yaml"))
        types = graph.node_types
        expected = 0
        for pred in reg.unary:
            sig = reg.type_constraints.get(pred)
            expected += sum(1 for n in graph.nodes if sig is None or types[n] == sig)
        for pred in reg.binary - {"rel"}:
            sig = reg.type_constraints.get(pred)
            for a, b in itertools.product(graph.nodes, repeat=2):
                if (a, b) in set(graph.edges) and (sig is None or (types[a], types[b]) == sig):
                    expected += 1
        assert len(init_world(graph, reg)) == expected

    def test_unknown_type_in_constraint(self):
        g = KnowledgeGraph(["x"], node_types={"x": "t"})
        with pytest.raises(UnknownType):
            init_world(g, PredicateRegistry(unary={"p"}, type_constraints={"p": "ghost"}))

    def test_compatible_skips_untyped(self):
        reg = PredicateRegistry(unary={"p"}, type_constraints={"p": "t"})
        assert compatible(reg, {}, "p", "anything")

    def test_graph_attributes_declared_static(self):
        g = KnowledgeGraph(["a", "b"], [("a", "b")], node_attributes={"a": {"risk": Interval(0.5, 1)}})
        w = init_world(g, PredicateRegistry())
        assert w.is_static(("a", "risk"))


class TestFacts:
    def test_static_fact_record(self):
        facts = parse_facts("# annolog-v1\n- {element: [mary, phil], predicate: friend, static: true}\n")
        assert len(facts) == 1
        assert facts[0].static and facts[0].element == ("mary", "phil") and facts[0].bound == TRUE

    def test_empty_document(self):
        assert parse_facts("# annolog-v1\n") == []

    def test_inverted_bound(self):
        with pytest.raises(RangeError):
            parse_facts("# annolog-v1\n- {element: a, predicate: p, lower: 0.7, upper: 0.3}\n")

    def test_dump_round_trip(self):
        facts = parse_facts(demos.data_text("students_facts.yaml"))
        assert parse_facts(dump_facts(facts)) == facts

    def test_schedule(self):
        program = demos.students()
        w = init_world(program.graph, program.registry)
        queue = schedule_facts(w, program.facts, horizon=5)
        # static class(english) lands immediately
        assert w.get("english", "class") == TRUE and w.is_static(("english", "class"))
        # takes(john, math) at t=1 and its retraction at t=5 are both queued
        at1 = [u for u in queue.due(1) if u.key == (("john", "math"), "takes")]
        at5 = [u for u in queue.due(5) if u.key == (("john", "math"), "takes")]
        assert [u.bound for u in at1] == [TRUE] and [u.bound for u in at5] == [FALSE]

    def test_schedule_nothing(self):
        program = demos.students()
        w = init_world(program.graph, program.registry)
        before = w.snapshot()
        queue = schedule_facts(w, [])
        assert len(queue) == 0 and w.snapshot() == before

    def test_fact_on_missing_atom(self):
        program = demos.students()
        w = init_world(program.graph, program.registry)
        with pytest.raises(UnknownAtom):
            schedule_facts(w, [Fact(("math", "john"), "takes", TRUE)])

    def test_conflicting_static_facts_leave_unknown(self):
        program = demos.students()
        w = init_world(program.graph, program.registry)
        queue = schedule_facts(w, [Fact("math", "class", TRUE, static=True),
                                   Fact("math", "class", FALSE, static=True)])
        assert w.get("math", "class") == BOTTOM and w.is_static(("math", "class"))
        assert queue.initial[-1].cause == "inconsistency-resolution"
