"""GraphML reading and writing.

Numeric data keys become annotations: a scalar ``v`` reads as ``[v, 1]``,
while a pair of keys named ``<pred>.lower`` / ``<pred>.upper`` gives both
bounds.  The ``type`` key (configurable) carries the node type tag; other
string keys are ignored.
"""
from __future__ import annotations

import os
import xml.etree.ElementTree as ET
from xml.sax.saxutils import escape, quoteattr

from .errors import BadAnnotation, DanglingEdge, ParseError
from .lattice import Interval
from .model import KnowledgeGraph

NUMERIC_TYPES = {"double", "float", "int", "long", "boolean"}
GRAPHML_NS = "http://graphml.graphdrawing.org/xmlns"


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _number(raw: str, attr_type: str, where: str) -> float:
    raw = (raw or "").strip()
    if attr_type == "boolean":
        if raw.lower() in ("true", "1"):
            return 1.0
        if raw.lower() in ("false", "0"):
            return 0.0
        raise BadAnnotation(f"{where}: {raw!r} is not a boolean")
    try:
        return float(raw)
    except ValueError:
        raise BadAnnotation(f"{where}: {raw!r} is not numeric") from None


def _collect(values: dict[str, float], where: str) -> dict[str, Interval]:
    out = {}
    paired: dict[str, dict[str, float]] = {}
    for name, v in values.items():
        if not 0.0 <= v <= 1.0:
            raise BadAnnotation(f"{where}: attribute {name} = {v} lies outside [0, 1]")
        base, _, side = name.rpartition(".")
        if base and side in ("lower", "upper"):
            paired.setdefault(base, {})[side] = v
        else:
            out[name] = Interval(v, 1.0)
    for base, sides in paired.items():
        lo, hi = sides.get("lower", 0.0), sides.get("upper", 1.0)
        if lo > hi:
            raise BadAnnotation(f"{where}: attribute {base} has lower {lo} > upper {hi}")
        out[base] = Interval(lo, hi)
    return out


def load_graph(source, type_key: str = "type") -> KnowledgeGraph:
    """Parse a GraphML document given as text, bytes or a file path."""
    try:
        if isinstance(source, (bytes, bytearray)):
            root = ET.fromstring(source)
        elif isinstance(source, os.PathLike) or (isinstance(source, str) and not source.lstrip().startswith("<")):
            root = ET.parse(source).getroot()
        else:
            root = ET.fromstring(source)
    except ET.ParseError as exc:
        line, col = getattr(exc, "position", (None, None))
        raise ParseError(f"malformed GraphML: {exc}", line=line, column=col) from exc
    if _local(root.tag) != "graphml":
        raise ParseError(f"root element is <{_local(root.tag)}>, expected <graphml>")

    keys = {}
    for key in root:
        if _local(key.tag) != "key":
            continue
        default = None
        for child in key:
            if _local(child.tag) == "default":
                default = child.text
        keys[key.get("id")] = {
            "for": key.get("for", "all"),
            "name": key.get("attr.name", key.get("id")),
            "type": key.get("attr.type", "string"),
            "default": default,
        }

    graphs = [g for g in root if _local(g.tag) == "graph"]
    if not graphs:
        return KnowledgeGraph()
    if len(graphs) > 1:
        raise ParseError("only one <graph> per document is supported")
    graph = graphs[0]
    undirected = graph.get("edgedefault", "directed") == "undirected"

    def read_data(elem, kind, where):
        values: dict[str, float] = {}
        tag = None
        present = {}
        for d in elem:
            if _local(d.tag) == "data":
                if d.get("key") not in keys:
                    raise ParseError(f"{where}: data refers to undeclared key {d.get('key')!r}")
                present[d.get("key")] = d.text
        for kid, spec in keys.items():
            if spec["for"] not in (kind, "all"):
                continue
            raw = present.get(kid, spec["default"])
            if raw is None:
                continue
            if spec["name"] == type_key and kind == "node":
                tag = raw.strip()
            elif spec["type"] in NUMERIC_TYPES:
                values[spec["name"]] = _number(raw, spec["type"], where)
        return _collect(values, where), tag

    nodes, node_attrs, node_types = [], {}, {}
    edges, edge_attrs = [], {}
    for elem in graph:
        kind = _local(elem.tag)
        if kind == "node":
            nid = elem.get("id")
            if nid is None:
                raise ParseError("node without id")
            attrs, tag = read_data(elem, "node", f"node {nid}")
            nodes.append(nid)
            if attrs:
                node_attrs[nid] = attrs
            if tag is not None:
                node_types[nid] = tag
    node_set = set(nodes)
    for elem in graph:
        if _local(elem.tag) != "edge":
            continue
        src, dst = elem.get("source"), elem.get("target")
        if src not in node_set or dst not in node_set:
            raise DanglingEdge(f"edge ({src}, {dst}) references an unknown node")
        attrs, _ = read_data(elem, "edge", f"edge ({src}, {dst})")
        pairs = [(src, dst), (dst, src)] if undirected and src != dst else [(src, dst)]
        for e in pairs:
            edges.append(e)
            if attrs:
                edge_attrs.setdefault(e, {}).update(attrs)
    return KnowledgeGraph(nodes, edges, node_attrs, edge_attrs, node_types)


def _fmt(v: float) -> str:
    return repr(float(v))


def write_graph(graph: KnowledgeGraph, type_key: str = "type") -> str:
    """Serialise ``graph`` deterministically (same graph, same bytes)."""
    lines = ['<?xml version="1.0" encoding="UTF-8"?>',
             f'<graphml xmlns="{GRAPHML_NS}">']
    ids = {}
    if graph.node_types:
        ids[("node", type_key)] = "t0"
        lines.append(f'  <key id="t0" for="node" attr.name={quoteattr(type_key)} attr.type="string"/>')

    def declare(kind, attr_maps, prefix):
        preds = sorted({p for a in attr_maps for p in a})
        for i, p in enumerate(preds):
            if all(a[p].upper == 1.0 for a in attr_maps if p in a):
                ids[(kind, p)] = f"{prefix}{i}"
                lines.append(f'  <key id="{prefix}{i}" for="{kind}" attr.name={quoteattr(p)} attr.type="double"/>')
            else:
                for side in ("lower", "upper"):
                    kid = f"{prefix}{i}{side[0]}"
                    ids[(kind, f"{p}.{side}")] = kid
                    lines.append(f'  <key id="{kid}" for="{kind}" attr.name={quoteattr(p + "." + side)} '
                                 f'attr.type="double"/>')

    declare("node", list(graph.node_attributes.values()), "n")
    declare("edge", list(graph.edge_attributes.values()), "e")
    lines.append('  <graph edgedefault="directed">')

    def data(kind, attrs):
        out = []
        for p in sorted(attrs):
            iv = attrs[p]
            if (kind, p) in ids:
                out.append(f'<data key="{ids[(kind, p)]}">{_fmt(iv.lower)}</data>')
            else:
                out.append(f'<data key="{ids[(kind, p + ".lower")]}">{_fmt(iv.lower)}</data>')
                out.append(f'<data key="{ids[(kind, p + ".upper")]}">{_fmt(iv.upper)}</data>')
        return out

    for n in graph.nodes:
        parts = []
        if n in graph.node_types:
            parts.append(f'<data key="t0">{escape(graph.node_types[n])}</data>')
        parts += data("node", graph.node_attributes.get(n, {}))
        if parts:
            lines.append(f'    <node id={quoteattr(n)}>' + "".join(parts) + "</node>")
        else:
            lines.append(f'    <node id={quoteattr(n)}/>')
    for src, dst in graph.edges:
        parts = data("edge", graph.edge_attributes.get((src, dst), {}))
        if parts:
            lines.append(f'    <edge source={quoteattr(src)} target={quoteattr(dst)}>' + "".join(parts) + "</edge>")
        else:
            lines.append(f'    <edge source={quoteattr(src)} target={quoteattr(dst)}/>')
    lines.append("  </graph>")
    lines.append("</graphml>")
    return "\n".join(lines) + "\n"
