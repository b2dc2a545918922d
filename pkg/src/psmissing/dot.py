"""Graphviz DOT export."""

from __future__ import annotations

from .graph import CausalGraph, EdgeKind, NodeRole

__all__ = ["export_dot"]


def _q(s: str) -> str:
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def export_dot(g: CausalGraph, name: str = "G") -> str:
    """DOT text for ``g``.

    Nodes follow the graph's node order and edges are sorted by (kind,
    source, target) in that order, so output is stable. Causal edges are
    solid arrows, deterministic edges carry the label ``=``, dashed edges
    are undirected with ``style=dashed``. Unobserved nodes are drawn dashed
    and grey; the stratum node is a double circle.
    """
    out = [f"digraph {_q(name)} {{", "  node [shape=circle];"]
    for n in g.nodes:
        attrs = [f"label={_q(n.tag or n.id)}"]
        if n.role is NodeRole.UNOBSERVED:
            attrs += ["style=dashed", "color=grey50", "fontcolor=grey50"]
        elif n.role is NodeRole.PRINCIPAL_STRATUM:
            attrs.append("shape=doublecircle")
        elif n.role is NodeRole.CONSTANT:
            attrs.append("shape=box")
        out.append(f"  {_q(n.id)} [{', '.join(attrs)}];")
    pos = {v: i for i, v in enumerate(g.ids)}
    kinds = list(EdgeKind)
    for e in sorted(g.edges, key=lambda e: (kinds.index(e.kind), pos[e.source], pos[e.target])):
        if e.kind is EdgeKind.CAUSAL:
            attrs = ""
        elif e.kind is EdgeKind.DETERMINISTIC:
            attrs = ' [label="=", penwidth=2]'
        else:
            attrs = " [style=dashed, dir=none]"
        out.append(f"  {_q(e.source)} -> {_q(e.target)}{attrs};")
    out.append("}")
    return "\n".join(out) + "\n"
