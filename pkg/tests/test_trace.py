import dataclasses
import json

import pytest

from annolog import demos
from annolog.engine import initial_world, run
from annolog.errors import ReplayDivergence
from annolog.lattice import BOTTOM, FALSE, Interval
from annolog.trace import RESOLUTION, SCHEMA, Trace, TraceEntry, export, from_json, read_csv, replay, to_csv, to_json

HEADER = "t,gamma,element,predicate,old_lower,old_upper,new_lower,new_upper,cause"


def demo_programs():
    return {
        "students": demos.students(),
        "conflict": demos.conflict(),
        "relevance_chain": demos.relevance_chain(),
        "relevance": demos.relevance(nodes=150, horizon=6),
        "relevance_reset": dataclasses.replace(demos.relevance(nodes=150, horizon=6), persistence_mode="reset"),
        "disruption": demos.disruption(nodes=300, horizon=15),
    }


class TestCsv:
    def test_empty_trace_is_header_only(self):
        lines = to_csv(Trace()).splitlines()
        assert lines == [f"# {SCHEMA}", HEADER]

    def test_relevance_header_and_first_rule_row(self):
        _, trace = demos.relevance_chain().run()
        text = export(trace, "csv", n_clauses=4)
        lines = text.splitlines()
        assert lines[1] == HEADER + ",clause_1,clause_2,clause_3,clause_4"
        first = next(ln for ln in lines if ",rule_1," in ln)
        assert first == '1,1,a,relevance,0.0,1.0,0.6,1.0,rule_1,c,"(a;c)",,'

    def test_read_back(self):
        _, trace = demos.students().run()
        rows = read_csv(to_csv(trace))
        assert len(rows) == len(trace)
        friend = next(r for r in rows if r["cause"] == "rule_5")
        assert friend["element"] == "(john;phil)" and friend["clause_1"] == "(john;mary)"

    def test_export_to_file(self, tmp_path):
        _, trace = demos.students().run()
        path = tmp_path / "trace.csv"
        text = export(trace, "csv", path)
        assert path.read_text() == text

    def test_unknown_format(self):
        with pytest.raises(ValueError):
            export(Trace(), "xml")


class TestJson:
    @pytest.mark.parametrize("name", ["students", "conflict", "relevance_chain"])
    def test_round_trip(self, name):
        _, trace = demo_programs()[name].run()
        back = from_json(to_json(trace))
        assert back.entries == trace.entries
        assert back.persistence_mode == trace.persistence_mode and back.horizon == trace.horizon

    def test_schema_checked(self):
        with pytest.raises(ValueError):
            from_json(json.dumps({"schema": "other", "entries": []}))


class TestEntries:
    def test_student_entry(self):
        _, trace = demos.students().run()
        e = next(e for e in trace if e.element == ("john", "mary") and e.predicate == "friend")
        assert (e.t, e.cause) == (4, "rule_4")
        assert e.clause_groundings == ((("john", "english"),), (("mary", "english"),), ("english",))

    def test_resolution_entry(self):
        _, trace = demos.conflict().run()
        e = next(e for e in trace if e.cause == RESOLUTION)
        assert e.old_bound == FALSE and e.new_bound == BOTTOM and e.static
        assert "rule_1" in e.detail

    def test_groundings_match_clause_count(self):
        prog = demos.relevance(nodes=150, horizon=6)
        sizes = {r.id: len(r.clauses) for r in prog.rules}
        _, trace = prog.run()
        for e in trace:
            if e.cause in sizes:
                assert len(e.clause_groundings) == sizes[e.cause]
            elif e.cause != RESOLUTION:
                assert e.clause_groundings == ()

    def test_quiet_steps_record_nothing(self):
        prog = demos.students()
        per_step = []
        run(prog.graph, prog.registry, [], [], prog.config(), on_step=lambda t, w, e: per_step.append(e))
        assert all(entries == [] for entries in per_step)


class TestReplay:
    @pytest.mark.parametrize("name", list(demo_programs()))
    def test_replay_reproduces_world(self, name):
        prog = demo_programs()[name]
        world, trace = prog.run()
        rebuilt = replay(initial_world(prog.graph, prog.registry), trace, expected=world)
        assert rebuilt == world

    def test_empty_trace(self):
        prog = demos.students()
        init = initial_world(prog.graph, prog.registry)
        assert replay(init, Trace()) == init

    def test_tampered_entry(self):
        prog = demos.students()
        _, trace = prog.run()
        index = next(i for i, e in enumerate(trace.entries) if e.cause == "rule_4")
        bad = dataclasses.replace(trace.entries[index], old_bound=Interval(0.2, 0.9))
        trace.entries[index] = bad
        with pytest.raises(ReplayDivergence) as exc:
            replay(initial_world(prog.graph, prog.registry), trace)
        assert exc.value.index == index

    def test_final_bounds_are_justified(self):
        prog = demos.relevance(nodes=150, horizon=6)
        world, trace = prog.run()
        last = {}
        for e in trace:
            last[e.key] = e.new_bound
        for key, bound in world.items():
            if bound != BOTTOM:
                assert last[key] == bound


class TestDeterminism:
    def test_identical_bytes_across_runs_and_workers(self):
        texts = set()
        for workers in (1, 1, 3):
            _, trace = demos.disruption(nodes=300, horizon=10).run(workers=workers)
            texts.add(to_csv(trace))
        assert len(texts) == 1

    def test_entry_is_frozen(self):
        e = TraceEntry(0, 0, "a", "p", BOTTOM, FALSE, "f")
        with pytest.raises(dataclasses.FrozenInstanceError):
            e.t = 3
