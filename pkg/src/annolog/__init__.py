"""Annotated logic over knowledge graphs: interval truth bounds, temporal rules and traces."""
from .engine import EngineConfig, GroundRuleInstance, ground_rule, query_entailment, run, step
from .errors import AnnologError
from .graphml import load_graph, write_graph
from .lattice import BOTTOM, FALSE, TRUE, AnnotationFn, Interval, apply_annotation_fn, negate, tighten
from .model import Fact, KnowledgeGraph, PredicateRegistry, World, init_world, load_registry, parse_facts
from .rules import parse_rule, parse_rules
from .trace import Trace, TraceEntry, export, replay

__version__ = "0.1.0"

__all__ = [
    "AnnologError", "AnnotationFn", "BOTTOM", "EngineConfig", "FALSE", "Fact", "GroundRuleInstance",
    "Interval", "KnowledgeGraph", "PredicateRegistry", "TRUE", "Trace", "TraceEntry", "World",
    "apply_annotation_fn", "export", "ground_rule", "init_world", "load_graph", "load_registry",
    "negate", "parse_facts", "parse_rule", "parse_rules", "query_entailment", "replay", "run", "step",
    "tighten", "write_graph",
]
