"""Command-line front end: run programs, generate graphs, benchmark and replay the bundled demos."""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from . import bench, demos
from .engine import EngineConfig, run, workers_from_env
from .errors import AnnologError
from .graphml import load_graph, write_graph
from .model import (KnowledgeGraph, PredicateRegistry, format_element, format_key, is_edge,
                    load_registry, parse_facts)
from .rules import parse_rules
from .synth import TOPOLOGIES, SynthSpec, generate
from .trace import export

MAX_LISTED = 50


@dataclass
class RunManifest:
    graph_path: str
    rules_path: str
    facts_path: str | None = None
    registry_path: str | None = None
    horizon: int = 0
    persistence_mode: str = "persistent"
    inconsistency_policy: str = "resolve"
    trace_output: str | None = None
    output_format: str = "csv"

    def __post_init__(self):
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")
        for name in ("graph_path", "rules_path", "facts_path", "registry_path"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                raise FileNotFoundError(f"{name.replace('_path', '')} file not found: {path}")

    @classmethod
    def from_yaml(cls, path) -> RunManifest:
        """Read a manifest; relative paths resolve against the manifest's directory."""
        base = Path(path).parent
        data = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"{path}: unknown manifest keys {sorted(unknown)}")
        for name in ("graph_path", "rules_path", "facts_path", "registry_path", "trace_output"):
            if data.get(name) is not None:
                data[name] = str(base / data[name])
        return cls(**data)


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


class _Located(AnnologError):
    """An error message already prefixed with the offending file."""


def _with_path(path, fn, *args):
    try:
        return fn(*args)
    except AnnologError as exc:
        raise _Located(f"{path}: {type(exc).__name__}: {exc}") from exc


def infer_registry(graph: KnowledgeGraph, rules, facts) -> PredicateRegistry:
    """Declare every predicate seen in the graph, rules and facts, with arity taken from its use."""
    unary, binary = set(), set()
    for attrs in graph.node_attributes.values():
        unary.update(attrs)
    for attrs in graph.edge_attributes.values():
        binary.update(attrs)
    for rule in rules:
        (unary if len(rule.head_args) == 1 else binary).add(rule.head_predicate)
        for clause in rule.clauses:
            (unary if len(clause.args) == 1 else binary).add(clause.predicate)
    for fact in facts:
        (binary if is_edge(fact.element) else unary).add(fact.predicate)
    binary.discard("rel")
    clash = unary & binary
    if clash:
        raise _Located(f"predicates used with both arities: {sorted(clash)}; pass --registry")
    return PredicateRegistry(unary=unary, binary=binary)


def load_program(manifest: RunManifest):
    graph = _with_path(manifest.graph_path, load_graph, manifest.graph_path)
    facts = _with_path(manifest.facts_path, parse_facts, _read(manifest.facts_path)) if manifest.facts_path else []
    if manifest.registry_path:
        registry = _with_path(manifest.registry_path, load_registry, _read(manifest.registry_path))
        rules = _with_path(manifest.rules_path, parse_rules, _read(manifest.rules_path), registry)
    else:
        rules = _with_path(manifest.rules_path, parse_rules, _read(manifest.rules_path), None)
        registry = infer_registry(graph, rules, facts)
    return graph, registry, rules, facts


def summarize(world, registry, out=None) -> None:
    """Per-predicate bound-class counts, then the true atoms when there are few of them."""
    out = out or sys.stdout
    print(f"final interpretation at t={world.current_time}", file=out)
    print(f"{'predicate':<16}{'true':>8}{'partial':>9}{'unknown':>9}{'false':>7}", file=out)
    true_atoms = []
    for pred in sorted(registry.predicates):
        elements = world.elements_with(pred)
        if not elements:
            continue
        c = demos.count_classes(world, pred)
        print(f"{pred:<16}{c['true']:>8}{c['partial']:>9}{c['unknown']:>9}{c['false']:>7}", file=out)
        if pred != "rel":  # edges are listed by the graph itself
            true_atoms.extend((e, pred) for e in elements if world.get(e, pred).lower == 1.0)
    if 0 < len(true_atoms) <= MAX_LISTED:
        print("true atoms:", file=out)
        for key in sorted(true_atoms, key=lambda k: (k[1], format_element(k[0]))):
            print(f"  {format_key(key)}", file=out)


def _write_trace(trace, args, n_clauses=None) -> None:
    if args.trace_out:
        export(trace, args.format, args.trace_out, n_clauses)
        print(f"trace: {len(trace)} entries written to {args.trace_out}")


def cmd_run(args) -> int:
    if args.manifest:
        manifest = RunManifest.from_yaml(args.manifest)
        for name, value in (("horizon", args.timesteps), ("persistence_mode", args.mode),
                            ("inconsistency_policy", args.on_inconsistency),
                            ("trace_output", args.trace_out), ("output_format", args.format)):
            if value is not None:
                setattr(manifest, name, value)
    else:
        if not args.graph or not args.rules:
            raise _Located("run needs --graph and --rules (or --manifest)")
        manifest = RunManifest(args.graph, args.rules, args.facts, args.registry,
                               args.timesteps or 0, args.mode or "persistent",
                               args.on_inconsistency or "resolve", args.trace_out, args.format or "csv")
    graph, registry, rules, facts = load_program(manifest)
    config = EngineConfig(horizon=manifest.horizon, persistence_mode=manifest.persistence_mode,
                          inconsistency_policy=manifest.inconsistency_policy, workers=workers_from_env())
    world, trace = run(graph, registry, rules, facts, config)
    summarize(world, registry)
    if manifest.trace_output:
        n_clauses = max((len(r.clauses) for r in rules), default=0)
        export(trace, manifest.output_format, manifest.trace_output, n_clauses)
        print(f"trace: {len(trace)} entries written to {manifest.trace_output}")
    return 0


def cmd_generate(args) -> int:
    spec = SynthSpec(args.nodes, args.density, args.seed, args.topology)
    text = write_graph(generate(spec))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"{args.nodes} nodes, {spec.edge_count} edges written to {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def cmd_bench(args) -> int:
    def progress(row):
        print(f"N={row.nodes:<6} E={row.edges:<7} T={row.timesteps:<3} "
              f"{row.runtime_s:8.3f} s {row.memory_mb:8.2f} MB", file=sys.stderr)

    rows = bench.ladder(tuple(args.nodes), tuple(args.timesteps), args.density, args.seed,
                        args.repetitions, workers_from_env(), progress)
    text = bench.to_csv(rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _demo_students(args) -> int:
    program = demos.students()
    horizon = args.timesteps if args.timesteps is not None else program.horizon
    world, trace = program.run(**_overrides(args, horizon))
    print("friend atoms derived by rules:")
    for e in trace:
        if e.predicate == "friend" and e.cause.startswith("rule_"):
            print(f"  t={e.t} {format_key(e.key)} {e.new_bound} by {e.cause}")
    summarize(world, program.registry)
    _write_trace(trace, args, 3)
    return 0


def _demo_disruption(args) -> int:
    program = demos.disruption(nodes=args.nodes or 1000, density=args.density or 0.003,
                               seed=args.seed if args.seed is not None else 7,
                               horizon=args.timesteps if args.timesteps is not None else 40)
    rows = []

    def record(t, world, entries):
        c = demos.count_classes(world, "disrupted")
        rows.append(c)
        print(f"t={t:<3} disrupted={c['true']:<6} partially disrupted={c['partial']}")

    cfg = _overrides(args, program.horizon)
    world, trace = run(program.graph, program.registry, program.rules, program.facts,
                       program.config(**cfg), on_step=record)
    print(f"converged at t={demos.converged_at([{'t': i, **r} for i, r in enumerate(rows)])}")
    _write_trace(trace, args, 2)
    return 0


def _demo_relevance(args) -> int:
    program = demos.relevance(nodes=args.nodes or 300, density=args.density or 0.02,
                              seed=args.seed if args.seed is not None else 11,
                              horizon=args.timesteps if args.timesteps is not None else 8)

    def record(t, world, entries):
        c = demos.count_classes(world, "relevance")
        print(f"t={t:<3} fully relevant={c['true']:<6} partially relevant={c['partial']}")

    cfg = _overrides(args, program.horizon)
    world, trace = run(program.graph, program.registry, program.rules, program.facts,
                       program.config(**cfg), on_step=record)
    _write_trace(trace, args, 3)
    return 0


def _overrides(args, horizon) -> dict:
    opts = {"horizon": horizon, "workers": workers_from_env()}
    if args.mode:
        opts["persistence_mode"] = args.mode
    if args.on_inconsistency:
        opts["inconsistency_policy"] = args.on_inconsistency
    return opts


def cmd_demo(args) -> int:
    return {"students": _demo_students, "disruption": _demo_disruption,
            "relevance": _demo_relevance}[args.name](args)


def _engine_flags(p, defaults: bool) -> None:
    p.add_argument("--timesteps", type=int, default=None, help="horizon T (inclusive)")
    p.add_argument("--mode", choices=("reset", "persistent"), default=None)
    p.add_argument("--on-inconsistency", choices=("resolve", "halt"), default=None)
    p.add_argument("--trace-out", default=None, help="write the rule trace here")
    p.add_argument("--format", choices=("csv", "json"), default=None if not defaults else "csv")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="annolog", description="Annotated logic over knowledge graphs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a program and summarize the final interpretation")
    p.add_argument("--manifest", default=None, help="YAML manifest naming the input files")
    p.add_argument("--graph")
    p.add_argument("--rules")
    p.add_argument("--facts")
    p.add_argument("--registry", help="predicate declarations; inferred from usage when omitted")
    _engine_flags(p, defaults=False)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("generate", help="write a seeded synthetic graph as GraphML")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--density", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topology", choices=TOPOLOGIES, default="uniform-random")
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("bench", help="runtime and memory over a ladder of graph sizes")
    p.add_argument("--nodes", type=int, nargs="+", default=[1000, 2000, 5000, 10000])
    p.add_argument("--timesteps", type=int, nargs="+", default=[2, 5, 15])
    p.add_argument("--density", type=float, default=4.10e-4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("-o", "--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("demo", help="run one of the bundled scenarios")
    p.add_argument("name", choices=demos.DEMOS)
    p.add_argument("--nodes", type=int, default=None)
    p.add_argument("--density", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    _engine_flags(p, defaults=True)
    p.set_defaults(func=cmd_demo)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AnnologError, OSError, ValueError) as exc:
        print(f"annolog: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
