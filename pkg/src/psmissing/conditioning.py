"""Conditional graphs: zoom into a graph at fixed values of observed nodes.

Conditioning proceeds node by node in causal order. For each node, every
pair of its remaining parents (and dashed neighbours) gets a dashed edge,
then the node is removed. After each step the graph is decluttered:

a. constants are dropped (S in the control arm under one-sided
   noncompliance, and nodes with role ``constant``);
b. C and S are merged into ``C_eq_S`` in the treated arm under one-sided
   noncompliance, where they are in one-to-one correspondence;
c. an unobserved node that is now the unique cause of a single node, and
   otherwise unconnected, is dropped;
d. an unobserved node with no children is dropped.

The stratum node ``C`` is never removed by (c) or (d).
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .exceptions import ConditioningError, GraphError
from .graph import CausalGraph, Edge, EdgeKind, GraphKind, Node, NodeRole, pairs
from .strata import Setting

__all__ = [
    "ConditioningSpec",
    "ConditionalGraph",
    "ColliderFanWarning",
    "MERGED_ID",
    "condition",
    "collider_fan",
]

MERGED_ID = "C_eq_S"

_ITEM = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*(?:=\s*([01]))?\s*$")


class ColliderFanWarning(UserWarning):
    """Conditioning on a node whose ancestors include colliders.

    The dashed-edge device only links direct parents; dependence induced
    further up the ancestor set is not drawn.
    """


@dataclass(frozen=True)
class ConditioningSpec:
    """Ordered (node, value) pairs; value is None for a symbolic value."""

    items: tuple[tuple[str, int | None], ...]

    def __post_init__(self):
        items = []
        for node, value in self.items:
            if value is not None:
                value = int(value)
                if value not in (0, 1):
                    raise ConditioningError(f"value for {node} must be 0 or 1, got {value}")
            items.append((str(node), value))
        ids = [n for n, _ in items]
        if len(set(ids)) != len(ids):
            raise ConditioningError("a node appears twice in the conditioning spec")
        object.__setattr__(self, "items", tuple(items))

    @classmethod
    def parse(cls, text) -> "ConditioningSpec":
        """Parse ``"X,Z=1,S=1"``; also accepts a sequence of such tokens or pairs."""
        if isinstance(text, ConditioningSpec):
            return text
        if isinstance(text, str):
            tokens = [t for t in text.split(",") if t.strip()]
        else:
            tokens = list(text)
        items = []
        for tok in tokens:
            if isinstance(tok, tuple):
                items.append(tok)
                continue
            m = _ITEM.match(tok)
            if not m:
                raise ConditioningError(f"cannot parse conditioning item {tok!r}")
            items.append((m.group(1), None if m.group(2) is None else int(m.group(2))))
        return cls(tuple(items))

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.items)

    def value(self, node: str):
        return dict(self.items).get(node)

    def __add__(self, other) -> "ConditioningSpec":
        return ConditioningSpec(self.items + ConditioningSpec.parse(other).items)

    def __str__(self):
        return ",".join(n if v is None else f"{n}={v}" for n, v in self.items)


@dataclass(frozen=True, eq=False)
class ConditionalGraph:
    """Result of conditioning a graph.

    Attributes
    ----------
    graph : CausalGraph
        Kind ``conditional``.
    merged : dict
        Original id -> merged id (``C`` and ``S`` -> ``C_eq_S``).
    dropped : tuple of str
        Ids removed, in removal order.
    reasons : dict
        Id -> why it was removed.
    spec : ConditioningSpec
        Everything conditioned on so far.
    setting : Setting or None
    warnings : tuple of str
    """

    graph: CausalGraph
    merged: dict = field(default_factory=dict)
    dropped: tuple = ()
    reasons: dict = field(default_factory=dict)
    spec: ConditioningSpec = ConditioningSpec(())
    setting: Setting | None = None
    warnings: tuple = ()
    roles: dict = field(default_factory=dict)

    def resolve(self, node_id: str) -> str:
        """Map an original id to the id it has in :attr:`graph`."""
        return self.merged.get(node_id, node_id)

    def __contains__(self, node_id) -> bool:
        return self.resolve(node_id) in self.graph

    def __eq__(self, other):
        if not isinstance(other, ConditionalGraph):
            return NotImplemented
        return self.graph == other.graph and self.merged == other.merged

    def __hash__(self):
        return hash(self.graph)


def collider_fan(g: CausalGraph, v: str) -> set[str]:
    """All direct and indirect causes of ``v``."""
    g.check_ids([v])
    return g.ancestors(v)


def _check_order(g: CausalGraph, nodes: Sequence[str]):
    for i, a in enumerate(nodes):
        anc = g.ancestors(a)
        for b in nodes[i + 1:]:
            if b in anc:
                raise ConditioningError(
                    f"conditioning order violates causal order: {b} is upstream of {a}; "
                    "condition on upstream nodes first"
                )


def _check_values(spec: ConditioningSpec, roles: dict, setting: Setting | None):
    z_val = s_val = None
    for node, value in spec.items:
        role = roles.get(node)
        if role is NodeRole.TREATMENT_ASSIGNED:
            z_val = value
        elif role is NodeRole.TREATMENT_RECEIVED:
            s_val = value
        if role is not None and not role.observed and role is not NodeRole.PRINCIPAL_STRATUM:
            raise ConditioningError(f"cannot condition on unobserved node {node}")
    if setting is Setting.ONE_SIDED and z_val == 0 and s_val == 1:
        raise ConditioningError("S=1 is impossible in the control arm under one-sided noncompliance")


def condition(g, spec, setting=None) -> ConditionalGraph:
    """Condition ``g`` on the nodes in ``spec``, in order.

    Parameters
    ----------
    g : CausalGraph or ConditionalGraph
        A ConditionalGraph is conditioned further (staged conditioning).
    spec : ConditioningSpec, str or sequence
        For example ``"X,Z=1"``.
    setting : Setting, optional
        Needed for the setting-dependent declutter rules (a) and (b).
        Defaults to the setting of a ConditionalGraph input.

    Raises
    ------
    ConditioningError
        Order violation, value inconsistent with the setting, or an
        unobserved node in the spec.
    GraphError
        Unknown node id.
    """
    spec = ConditioningSpec.parse(spec)
    if isinstance(g, ConditionalGraph):
        base = g
    else:
        base = ConditionalGraph(graph=g)
    if setting is None:
        setting = base.setting
    elif not isinstance(setting, Setting):
        setting = Setting.coerce(setting)

    graph = base.graph
    merged = dict(base.merged)
    dropped = list(base.dropped)
    reasons = dict(base.reasons)
    notes = list(base.warnings)
    full_spec = base.spec + spec

    resolved = []
    for node, _ in spec.items:
        r = merged.get(node, node)
        if r in graph:
            resolved.append(r)
        elif node in reasons and reasons[node].startswith("constant"):
            continue  # conditioning on a constant is a no-op
        else:
            raise GraphError(f"unknown node id {node!r}")
    _check_order(graph, resolved)
    roles = dict(base.roles)
    for node, _ in spec.items:
        r = merged.get(node, node)
        if r in graph:
            roles[node] = graph.node(r).role
    _check_values(full_spec, roles, setting)

    z_value = None
    for node, value in full_spec.items:
        if roles.get(node) is NodeRole.TREATMENT_ASSIGNED:
            z_value = value
    state = _State(graph.replace(kind=GraphKind.CONDITIONAL), merged, dropped, reasons, notes)
    state.declutter(setting, z_value)
    for node, _ in spec.items:
        v = state.merged.get(node, node)
        if v not in state.graph:
            continue
        state.condition_one(v)
        state.declutter(setting, z_value)

    return ConditionalGraph(
        graph=state.graph,
        merged=state.merged,
        dropped=tuple(state.dropped),
        reasons=state.reasons,
        spec=full_spec,
        setting=setting,
        warnings=tuple(state.notes),
        roles=roles,
    )


class _State:
    def __init__(self, graph, merged, dropped, reasons, notes):
        self.graph = graph
        self.merged = merged
        self.dropped = dropped
        self.reasons = reasons
        self.notes = notes

    def drop(self, v, reason):
        self.graph = self.graph.replace(remove_nodes=[v])
        self.dropped.append(v)
        self.reasons[v] = reason

    def condition_one(self, v):
        g = self.graph
        linked = set(g.parents(v)) | set(g.dashed_neighbors(v))
        for p in g.parents(v):
            if g.parents(p) or g.dashed_neighbors(p):
                msg = (
                    f"conditioning on {v}: its cause {p} has causes of its own that become "
                    f"dependent too; they are not linked here (see collider_fan({v!r}))"
                )
                if msg not in self.notes:
                    self.notes.append(msg)
                    warnings.warn(msg, ColliderFanWarning, stacklevel=4)
                break
        new = [Edge.dashed(a, b) for a, b in pairs(linked)]
        self.graph = g.replace(add_edges=new, remove_nodes=[v])
        self.dropped.append(v)
        self.reasons[v] = "conditioned"

    def declutter(self, setting, z_value):
        changed = True
        while changed:
            changed = (
                self._rule_a(setting, z_value)
                or self._rule_b(setting, z_value)
                or self._rule_c()
                or self._rule_d()
            )

    def _rule_a(self, setting, z_value):
        g = self.graph
        for n in g.nodes:
            if n.role is NodeRole.CONSTANT:
                self.drop(n.id, "constant")
                return True
        if setting is Setting.ONE_SIDED and z_value == 0:
            s = g.role_node(NodeRole.TREATMENT_RECEIVED)
            if s is not None:
                self.drop(s, "constant (S=0 in the control arm)")
                return True
        return False

    def _rule_b(self, setting, z_value):
        if setting is not Setting.ONE_SIDED or z_value != 1:
            return False
        g = self.graph
        s = g.role_node(NodeRole.TREATMENT_RECEIVED)
        c = g.role_node(NodeRole.PRINCIPAL_STRATUM)
        if s is None or c is None or s == MERGED_ID:
            return False
        if c not in g.parents(s):
            return False
        # keep C's causes and S's effects
        m = MERGED_ID
        edges = set()
        for e in g.edges:
            if c not in e.endpoints and s not in e.endpoints:
                edges.add(e)
                continue
            if e.endpoints in ((c, s),):
                continue
            a, b = e.source, e.target
            a = m if a in (c, s) else a
            b = m if b in (c, s) else b
            if a == b:
                continue
            if e.kind is EdgeKind.DETERMINISTIC:
                continue
            edges.add(Edge(e.kind, a, b))
        nodes = []
        for n in g.nodes:
            if n.id == c:
                continue
            if n.id == s:
                nodes.append(Node(m, NodeRole.TREATMENT_RECEIVED, "C=S"))
            else:
                nodes.append(n)
        self.graph = CausalGraph(nodes, edges, GraphKind.CONDITIONAL)
        for k, v in list(self.merged.items()):
            if v in (c, s):
                self.merged[k] = m
        self.merged[c] = m
        self.merged[s] = m
        return True

    def _rule_c(self):
        g = self.graph
        for n in g.nodes:
            if n.role is not NodeRole.UNOBSERVED:
                continue
            v = n.id
            if not g.parents(v) and not g.dashed_neighbors(v) and len(g.children(v)) == 1:
                self.drop(v, f"unique cause of {g.children(v)[0]}")
                return True
        return False

    def _rule_d(self):
        g = self.graph
        for n in g.nodes:
            if n.role is NodeRole.UNOBSERVED and not g.children(n.id):
                self.drop(n.id, "not a cause of any node")
                return True
        return False


def conditioned_ids(cg: ConditionalGraph) -> Iterable[str]:
    return cg.spec.nodes
