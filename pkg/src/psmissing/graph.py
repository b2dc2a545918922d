"""Mixed causal graphs and deterministic-aware m-separation.

A :class:`CausalGraph` holds typed nodes and three kinds of edges:

* causal arrows ``a -> b``;
* deterministic (equal-sign) arrows ``a => b``, used for ``(C, Z) => S``;
* undirected dashed edges ``a -- b``, produced by conditioning.

For separation queries a dashed edge behaves like a latent common cause of
its endpoints (a bidirected edge), deterministic arrows behave like causal
arrows, and any node whose deterministic parents are all conditioned on is
itself treated as conditioned on.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from itertools import combinations
from typing import Iterable

from .exceptions import GraphError

__all__ = [
    "NodeRole",
    "Node",
    "EdgeKind",
    "Edge",
    "GraphKind",
    "CausalGraph",
    "Path",
    "PathType",
    "validate_graph",
    "m_separated",
    "determinism_closure",
    "enumerate_active_paths",
    "classify_path",
]

NODE_ID = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class NodeRole(str, Enum):
    COVARIATE_X = "covariate"
    COVARIATE_V = "aux_v"
    AUXILIARY_W = "aux_w"
    TREATMENT_ASSIGNED = "treatment_assigned"
    TREATMENT_RECEIVED = "treatment_received"
    OUTCOME = "outcome"
    RESPONSE = "response"
    PRINCIPAL_STRATUM = "stratum"
    UNOBSERVED = "unobserved"
    CONSTANT = "constant"

    @property
    def observed(self) -> bool:
        return self not in (NodeRole.UNOBSERVED, NodeRole.PRINCIPAL_STRATUM)


UNIQUE_ROLES = (
    NodeRole.TREATMENT_ASSIGNED,
    NodeRole.TREATMENT_RECEIVED,
    NodeRole.OUTCOME,
    NodeRole.RESPONSE,
    NodeRole.PRINCIPAL_STRATUM,
)


@dataclass(frozen=True)
class Node:
    id: str
    role: NodeRole
    tag: str | None = None

    @property
    def observed(self) -> bool:
        return self.role.observed


class EdgeKind(str, Enum):
    CAUSAL = "->"
    DETERMINISTIC = "=>"
    DASHED = "--"


@dataclass(frozen=True)
class Edge:
    kind: EdgeKind
    source: str
    target: str

    def __post_init__(self):
        # dashed edges are unordered; store them canonically
        if self.kind is EdgeKind.DASHED and self.target < self.source:
            src, tgt = self.target, self.source
            object.__setattr__(self, "source", src)
            object.__setattr__(self, "target", tgt)

    @classmethod
    def causal(cls, a, b):
        return cls(EdgeKind.CAUSAL, a, b)

    @classmethod
    def deterministic(cls, a, b):
        return cls(EdgeKind.DETERMINISTIC, a, b)

    @classmethod
    def dashed(cls, a, b):
        return cls(EdgeKind.DASHED, a, b)

    @property
    def directed(self) -> bool:
        return self.kind is not EdgeKind.DASHED

    @property
    def endpoints(self) -> tuple[str, str]:
        return (self.source, self.target)

    def other(self, v: str) -> str:
        return self.target if v == self.source else self.source

    def __str__(self):
        return f"{self.source} {self.kind.value} {self.target}"


class GraphKind(str, Enum):
    DAG = "dag"
    PS_GRAPH = "ps-graph"
    CONDITIONAL = "conditional"


# edge marks at an endpoint
_TAIL, _ARROW = 0, 1


@dataclass(frozen=True, eq=False)
class CausalGraph:
    """Immutable mixed graph.

    Parameters
    ----------
    nodes : iterable of Node
        Node order is kept and used for deterministic output.
    edges : iterable of Edge
    kind : GraphKind
    """

    nodes: tuple[Node, ...]
    edges: frozenset[Edge] = field(default_factory=frozenset)
    kind: GraphKind = GraphKind.DAG

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", frozenset(self.edges))
        object.__setattr__(self, "kind", GraphKind(self.kind))

    def __eq__(self, other):
        if not isinstance(other, CausalGraph):
            return NotImplemented
        return (
            self.kind == other.kind
            and frozenset(self.nodes) == frozenset(other.nodes)
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.kind, frozenset(self.nodes), self.edges))

    def __repr__(self):
        return f"CausalGraph(kind={self.kind.value}, nodes={len(self.nodes)}, edges={len(self.edges)})"

    # -- lookup ------------------------------------------------------------

    @cached_property
    def _by_id(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes)

    def __contains__(self, node_id) -> bool:
        return node_id in self._by_id

    def node(self, node_id: str) -> Node:
        try:
            return self._by_id[node_id]
        except KeyError:
            raise GraphError(f"unknown node id {node_id!r}") from None

    def check_ids(self, ids: Iterable[str]):
        for v in ids:
            if v not in self._by_id:
                raise GraphError(f"unknown node id {v!r}")

    def nodes_with_role(self, role: NodeRole) -> tuple[str, ...]:
        return tuple(n.id for n in self.nodes if n.role is role)

    def role_node(self, role: NodeRole) -> str | None:
        """The id of the unique node with ``role``, or None."""
        found = self.nodes_with_role(role)
        if len(found) > 1:
            raise GraphError(f"more than one node with role {role.value}")
        return found[0] if found else None

    # -- adjacency ---------------------------------------------------------

    @cached_property
    def _adjacency(self):
        parents = {v: [] for v in self._by_id}
        children = {v: [] for v in self._by_id}
        det_parents = {v: [] for v in self._by_id}
        dashed = {v: [] for v in self._by_id}
        incident = {v: [] for v in self._by_id}
        for e in sorted(self.edges, key=lambda e: (e.source, e.target, e.kind.value)):
            a, b = e.source, e.target
            if a not in self._by_id or b not in self._by_id:
                continue
            if e.directed:
                parents[b].append(a)
                children[a].append(b)
                if e.kind is EdgeKind.DETERMINISTIC:
                    det_parents[b].append(a)
                incident[a].append((b, _TAIL, _ARROW, e))
                incident[b].append((a, _ARROW, _TAIL, e))
            else:
                dashed[a].append(b)
                dashed[b].append(a)
                incident[a].append((b, _ARROW, _ARROW, e))
                incident[b].append((a, _ARROW, _ARROW, e))
        return parents, children, det_parents, dashed, incident

    def parents(self, v: str) -> tuple[str, ...]:
        return tuple(self._adjacency[0][v])

    def children(self, v: str) -> tuple[str, ...]:
        return tuple(self._adjacency[1][v])

    def deterministic_parents(self, v: str) -> tuple[str, ...]:
        return tuple(self._adjacency[2][v])

    def dashed_neighbors(self, v: str) -> tuple[str, ...]:
        return tuple(self._adjacency[3][v])

    def incident(self, v: str):
        """(neighbor, mark at v, mark at neighbor, edge) tuples."""
        return self._adjacency[4][v]

    def has_edge(self, kind: EdgeKind, a: str, b: str) -> bool:
        return Edge(kind, a, b) in self.edges

    def ancestors(self, vs) -> set[str]:
        """Proper ancestors of a node (or of a set of nodes) via directed edges."""
        start = {vs} if isinstance(vs, str) else set(vs)
        seen: set[str] = set()
        stack = list(start)
        while stack:
            v = stack.pop()
            for p in self._adjacency[0][v]:
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        if isinstance(vs, str):
            seen.discard(vs)
        return seen

    def descendants(self, vs) -> set[str]:
        start = {vs} if isinstance(vs, str) else set(vs)
        seen: set[str] = set()
        stack = list(start)
        while stack:
            v = stack.pop()
            for c in self._adjacency[1][v]:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        if isinstance(vs, str):
            seen.discard(vs)
        return seen

    def find_cycle(self) -> list[str] | None:
        """A directed cycle as a node list (first node repeated at the end), or None."""
        color = {v: 0 for v in self._by_id}
        parent: dict[str, str] = {}
        for root in self._by_id:
            if color[root]:
                continue
            stack = [(root, iter(self._adjacency[1][root]))]
            color[root] = 1
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[v] = 2
                    stack.pop()
                elif color[nxt] == 0:
                    color[nxt] = 1
                    parent[nxt] = v
                    stack.append((nxt, iter(self._adjacency[1][nxt])))
                elif color[nxt] == 1:
                    cycle = [nxt]
                    u = v
                    while u != nxt:
                        cycle.append(u)
                        u = parent[u]
                    cycle.append(nxt)
                    return cycle[::-1]
        return None

    @cached_property
    def _topological(self) -> tuple[str, ...]:
        indeg = {v: len(self._adjacency[0][v]) for v in self._by_id}
        queue = deque(v for v in self.ids if indeg[v] == 0)
        order = []
        while queue:
            v = queue.popleft()
            order.append(v)
            for c in self._adjacency[1][v]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if len(order) != len(self._by_id):
            raise GraphError("graph has a directed cycle")
        return tuple(order)

    def topological_order(self) -> tuple[str, ...]:
        """Topological order of the directed part; ties keep node order."""
        return self._topological

    # -- construction helpers ---------------------------------------------

    def replace(self, *, add_nodes=(), remove_nodes=(), add_edges=(), remove_edges=(), kind=None):
        remove_nodes = set(remove_nodes)
        nodes = [n for n in self.nodes if n.id not in remove_nodes]
        nodes.extend(add_nodes)
        drop = set(remove_edges)
        edges = {
            e
            for e in self.edges
            if e not in drop and e.source not in remove_nodes and e.target not in remove_nodes
        }
        edges.update(add_edges)
        return CausalGraph(nodes, edges, self.kind if kind is None else kind)

    def relabel(self, mapping: dict[str, str]) -> "CausalGraph":
        f = lambda v: mapping.get(v, v)  # noqa: E731
        nodes = [Node(f(n.id), n.role, n.tag) for n in self.nodes]
        edges = [Edge(e.kind, f(e.source), f(e.target)) for e in self.edges]
        return CausalGraph(nodes, edges, self.kind)


# -- validation ------------------------------------------------------------


def validate_graph(g: CausalGraph) -> list[str]:
    """List invariant violations of ``g``; an empty list means valid."""
    problems = []
    seen = set()
    for n in g.nodes:
        if n.id in seen:
            problems.append(f"duplicate node id {n.id!r}")
        seen.add(n.id)
        if not NODE_ID.match(n.id):
            problems.append(f"invalid node id {n.id!r}")
    for e in sorted(g.edges, key=str):
        for v in e.endpoints:
            if v not in seen:
                problems.append(f"edge {e} has unknown endpoint {v!r}")
        if e.source == e.target:
            problems.append(f"cycle: self-loop on {e.source}")
    if problems:
        return problems

    cycle = g.find_cycle()
    if cycle is not None:
        problems.append("cycle: " + " -> ".join(cycle))

    for role in UNIQUE_ROLES:
        found = g.nodes_with_role(role)
        if len(found) > 1:
            problems.append(f"more than one node with role {role.value}: {', '.join(found)}")

    dashed = [e for e in g.edges if e.kind is EdgeKind.DASHED]
    if dashed and g.kind is not GraphKind.CONDITIONAL:
        problems.append(f"dashed edge {sorted(map(str, dashed))[0]} outside a conditional graph")

    for e in g.edges:
        if e.kind is EdgeKind.DETERMINISTIC and g.node(e.target).role is not NodeRole.TREATMENT_RECEIVED:
            problems.append(f"deterministic edge {e} must point into the treatment-received node")

    strata = g.nodes_with_role(NodeRole.PRINCIPAL_STRATUM)
    if g.kind is GraphKind.DAG and strata:
        problems.append("a dag must not contain a principal stratum node")
    if g.kind is GraphKind.PS_GRAPH:
        if len(strata) != 1:
            problems.append(f"ps-graph must contain exactly one principal stratum node, found {len(strata)}")
        for c in strata:
            problems.extend(_stratum_out_edge_problems(g, c))
    return problems


def _stratum_out_edge_problems(g: CausalGraph, c: str) -> list[str]:
    problems = []
    s = g.role_node(NodeRole.TREATMENT_RECEIVED)
    out = [e for e in g.edges if c in e.endpoints and (e.source == c or not e.directed)]
    for e in sorted(out, key=str):
        if e.kind is EdgeKind.DETERMINISTIC and e.target == s:
            continue
        if e.kind is EdgeKind.DASHED and g.kind is GraphKind.CONDITIONAL:
            continue
        problems.append(f"C emits non-deterministic edge {e}")
    if s is None or not g.has_edge(EdgeKind.DETERMINISTIC, c, s):
        problems.append(f"{c} has no deterministic edge into the treatment-received node")
    return problems


# -- separation ------------------------------------------------------------


def determinism_closure(g: CausalGraph, given: Iterable[str]) -> set[str]:
    """``given`` plus every node functionally determined by it."""
    closed = set(given)
    changed = True
    while changed:
        changed = False
        for v in g.ids:
            if v in closed:
                continue
            dp = g.deterministic_parents(v)
            if dp and all(p in closed for p in dp):
                closed.add(v)
                changed = True
    return closed


def _prepare_query(g, a, b, given):
    given = {given} if isinstance(given, str) else set(given)
    g.check_ids([a, b, *given])
    if a in given or b in given:
        raise GraphError("query endpoints must not be in the conditioning set")
    closed = determinism_closure(g, given)
    anc = g.ancestors(closed) | closed
    return closed, anc


def m_separated(g: CausalGraph, a: str, b: str, given: Iterable[str] = ()) -> bool:
    """True iff no active path connects ``a`` and ``b`` given ``given``.

    A node determined by the conditioning set (through deterministic edges)
    is treated as conditioned on; if ``a`` or ``b`` itself is determined it
    is a constant and the answer is True.
    """
    closed, anc = _prepare_query(g, a, b, given)
    if a == b:
        return False
    if a in closed or b in closed:
        return True
    seen = set()
    queue = deque()
    for w, _, mark_w, _ in g.incident(a):
        if w == b:
            return False
        if (w, mark_w) not in seen:
            seen.add((w, mark_w))
            queue.append((w, mark_w))
    while queue:
        v, mark_in = queue.popleft()
        for w, mark_out, mark_w, _ in g.incident(v):
            collider = mark_in == _ARROW and mark_out == _ARROW
            if collider:
                if v not in anc:
                    continue
            elif v in closed:
                continue
            if w == b:
                return False
            if (w, mark_w) not in seen:
                seen.add((w, mark_w))
                queue.append((w, mark_w))
    return True


@dataclass(frozen=True)
class Path:
    """A simple path: nodes[i] and nodes[i+1] are joined by edges[i]."""

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    colliders: tuple[bool, ...]  # one flag per interior node

    def __str__(self):
        parts = [self.nodes[0]]
        for e, v in zip(self.edges, self.nodes[1:]):
            prev = parts[-1]
            if e.kind is EdgeKind.DASHED:
                sym = "--"
            elif e.source == prev:
                sym = "=>" if e.kind is EdgeKind.DETERMINISTIC else "->"
            else:
                sym = "<=" if e.kind is EdgeKind.DETERMINISTIC else "<-"
            parts.extend([sym, v])
        return " ".join(parts)


def enumerate_active_paths(g: CausalGraph, a: str, b: str, given: Iterable[str] = ()) -> list[Path]:
    """All simple paths between ``a`` and ``b`` that are active given ``given``."""
    closed, anc = _prepare_query(g, a, b, given)
    if a in closed or b in closed:
        return []
    found: list[Path] = []

    def extend(nodes, edges, flags, mark_in):
        v = nodes[-1]
        for w, mark_out, mark_w, e in g.incident(v):
            if w in nodes:
                continue
            collider = None
            if len(nodes) > 1:
                collider = mark_in == _ARROW and mark_out == _ARROW
                if collider and v not in anc:
                    continue
                if not collider and v in closed:
                    continue
            new_flags = flags if collider is None else flags + (collider,)
            if w == b:
                found.append(Path(tuple(nodes) + (w,), edges + (e,), new_flags))
                continue
            nodes.append(w)
            extend(nodes, edges + (e,), new_flags, mark_w)
            nodes.pop()

    extend([a], (), (), None)
    found.sort(key=lambda p: (len(p.nodes), str(p)))
    return found


class PathType(str, Enum):
    DIRECT = "Type1-direct"
    UNOBSERVED_COMMON_CAUSE = "Type2-unobserved-common-cause"
    VIA_S_OR_C = "Type3-via-S-or-C"
    OTHER = "Other"


def classify_path(g: CausalGraph, p: Path) -> PathType:
    """Place an R-Y path into one of the three path families (or Other)."""
    r = g.role_node(NodeRole.RESPONSE)
    y = g.role_node(NodeRole.OUTCOME)
    if {p.nodes[0], p.nodes[-1]} != {r, y}:
        raise GraphError("path does not connect the response and outcome nodes")
    for u, v, e in zip(p.nodes, p.nodes[1:], p.edges):
        if e not in g.edges or {u, v} != set(e.endpoints):
            raise GraphError(f"path edge {e} is not in the graph")
    if len(p.edges) == 1:
        e = p.edges[0]
        if e.kind is EdgeKind.CAUSAL and e.source == y and e.target == r:
            return PathType.DIRECT
        return PathType.OTHER
    interior = [g.node(v) for v in p.nodes[1:-1]]
    s_or_c = (NodeRole.TREATMENT_RECEIVED, NodeRole.PRINCIPAL_STRATUM)
    if any(n.role in s_or_c for n in interior):
        return PathType.VIA_S_OR_C
    if all(n.role is NodeRole.UNOBSERVED for n in interior) and all(
        e.kind is not EdgeKind.DASHED for e in p.edges
    ):
        return PathType.UNOBSERVED_COMMON_CAUSE
    return PathType.OTHER


def pairs(items):
    """Unordered pairs of distinct items, in stable order."""
    return list(combinations(sorted(set(items)), 2))
