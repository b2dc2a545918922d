"""Deductive principal-stratification graphs.

The stratum node ``C`` absorbs every cause of S other than Z, and S becomes
an exact function of ``(C, Z)``.
"""

from __future__ import annotations

from .exceptions import GraphError
from .graph import CausalGraph, Edge, EdgeKind, GraphKind, Node, NodeRole, validate_graph

__all__ = ["to_principal_graph", "validate_principal", "STRATUM_ID"]

STRATUM_ID = "C"


def to_principal_graph(dag: CausalGraph) -> CausalGraph:
    """Add the stratum node ``C`` and route all non-Z causes of S through it.

    Raises
    ------
    GraphError
        If the input is not a valid DAG, lacks Z or S, or already has a node
        named ``C``.
    """
    if dag.kind is not GraphKind.DAG:
        raise GraphError(f"expected a dag, got a {dag.kind.value} graph")
    problems = validate_graph(dag)
    if problems:
        raise GraphError("invalid dag: " + "; ".join(problems))
    z = dag.role_node(NodeRole.TREATMENT_ASSIGNED)
    s = dag.role_node(NodeRole.TREATMENT_RECEIVED)
    if z is None or s is None:
        raise GraphError("the dag needs both a treatment-assigned and a treatment-received node")
    if STRATUM_ID in dag:
        raise GraphError(f"node id {STRATUM_ID!r} is reserved for the principal stratum")

    edges = set()
    for e in dag.edges:
        if e.target == s and e.kind is EdgeKind.CAUSAL:
            if e.source == z:
                edges.add(Edge.deterministic(z, s))
            else:
                edges.add(Edge.causal(e.source, STRATUM_ID))
        else:
            edges.add(e)
    edges.add(Edge.deterministic(STRATUM_ID, s))

    nodes = []
    for n in dag.nodes:
        nodes.append(n)
        if n.id == s:
            nodes.append(Node(STRATUM_ID, NodeRole.PRINCIPAL_STRATUM))
    return CausalGraph(nodes, edges, GraphKind.PS_GRAPH)


def validate_principal(g: CausalGraph) -> list[str]:
    """Violations specific to principal-stratification graphs (empty = valid)."""
    problems = []
    if g.kind is not GraphKind.PS_GRAPH:
        problems.append(f"expected a ps-graph, got {g.kind.value}")
    problems.extend(p for p in validate_graph(g) if p not in problems)
    for c in g.nodes_with_role(NodeRole.PRINCIPAL_STRATUM):
        if g.node(c).observed:
            problems.append(f"stratum node {c} must be unobserved")
    return problems
