"""Named models and randomized submodel families."""

from __future__ import annotations

from enum import Enum

import numpy as np

from .exceptions import GraphError
from .graph import CausalGraph, Edge, EdgeKind, GraphKind, Node, NodeRole
from .strata import Setting

__all__ = [
    "PresetId",
    "preset",
    "randomize_submodel",
    "assignment_ignorable",
    "MAIN_EDGES",
    "INSTRUMENTAL_VARIANTS",
]


class PresetId(str, Enum):
    D = "D"
    DM = "DM"
    DM_A = "DM-a"
    DM_B = "DM-b"
    DM_C = "DM-c"
    GENERAL_MAIN = "GeneralMain"
    THIRD_MAIN = "ThirdMain"
    GENERAL_MAIN_I = "GeneralMain-i"
    GENERAL_MAIN_II = "GeneralMain-ii"
    GENERAL_MAIN_III = "GeneralMain-iii"
    GENERAL_MAIN_IV = "GeneralMain-iv"
    DOWNSTREAM_IGNORABLE = "DownstreamIgnorable"
    DOWNSTREAM_NONIGNORABLE = "DownstreamNonIgnorable"
    ER = "ER"
    PI_1 = "PI-1"
    PI_2 = "PI-2"
    CANONICAL_W = "CanonicalW"
    INSTRUMENTAL_W = "InstrumentalW"

    @classmethod
    def coerce(cls, value) -> "PresetId":
        if isinstance(value, cls):
            return value
        for p in cls:
            if str(value) in (p.value, p.name):
                return p
        raise GraphError(f"unknown preset {value!r}")


_ROLE_BY_ID = {
    "X": NodeRole.COVARIATE_X,
    "V": NodeRole.COVARIATE_V,
    "W": NodeRole.AUXILIARY_W,
    "Z": NodeRole.TREATMENT_ASSIGNED,
    "S": NodeRole.TREATMENT_RECEIVED,
    "Y": NodeRole.OUTCOME,
    "R": NodeRole.RESPONSE,
}

MAIN_EDGES = (("X", "Z"), ("X", "S"), ("X", "Y"), ("Z", "S"), ("Z", "Y"), ("S", "Y"))

# common cause -> children
_DM_U = {
    "U_RX": ("X", "R"),
    "U_RZ": ("Z", "R"),
    "U_RS": ("S", "R"),
    "U_RY": ("Y", "R"),
    "U_YS": ("S", "Y"),
    "U_RYS": ("S", "Y", "R"),
}
_DM_R_PARENTS = ("X", "Z", "S", "Y")

INSTRUMENTAL_VARIANTS = ("R-arrow", "Y-arrow", "direct")


def _build(edges, extra_nodes=()) -> CausalGraph:
    ids = []
    for a, b in edges:
        for v in (a, b):
            if v not in ids:
                ids.append(v)
    for v in extra_nodes:
        if v not in ids:
            ids.append(v)
    order = ["X", "V", "W", "Z", "S", "Y", "R"]
    ids.sort(key=lambda v: (order.index(v) if v in order else len(order), v))
    nodes = []
    for v in ids:
        role = _ROLE_BY_ID.get(v, NodeRole.UNOBSERVED)
        nodes.append(Node(v, role, v if role is NodeRole.UNOBSERVED else None))
    return CausalGraph(nodes, [Edge.causal(a, b) for a, b in edges], GraphKind.DAG)


def _u_edges(spec):
    return [(u, c) for u, children in spec.items() for c in children]


def _dm_edges():
    return list(MAIN_EDGES) + _u_edges(_DM_U) + [(p, "R") for p in _DM_R_PARENTS]


def _without(edges, drop_edges=(), drop_nodes=()):
    drop_edges = set(drop_edges)
    drop_nodes = set(drop_nodes)
    return [e for e in edges if e not in drop_edges and not (set(e) & drop_nodes)]


def _dm_a_edges():
    return _without(_dm_edges(), [("Y", "R")], ["U_RY", "U_RYS"])


def _general_main_edges():
    return _dm_a_edges() + [("U_XS", "X"), ("U_XS", "S"), ("U_XY", "X"), ("U_XY", "Y")]


def _simple_main_edges():
    return list(MAIN_EDGES) + [("U", "S"), ("U", "Y")]


def _edges_for(pid: PresetId, variant: str):
    P = PresetId
    if pid is P.D:
        return _simple_main_edges(), ("R",)
    if pid is P.DM:
        return _dm_edges(), ()
    if pid is P.DM_A:
        return _dm_a_edges(), ()
    if pid is P.DM_B:
        return _without(_dm_a_edges(), drop_nodes=["U_RS"]), ()
    if pid is P.DM_C:
        return _without(_dm_a_edges(), drop_nodes=["U_YS"]), ()
    if pid is P.GENERAL_MAIN:
        return _general_main_edges(), ()
    if pid is P.THIRD_MAIN:
        edges = _without(_dm_edges(), [("Y", "R")]) + [("U_XZ", "X"), ("U_XZ", "Z")]
        return edges, ()
    if pid in _GENERAL_SUBMODELS:
        return _without(_general_main_edges(), drop_nodes=_GENERAL_SUBMODELS[pid]), ()
    if pid is P.DOWNSTREAM_IGNORABLE:
        edges = _without(_simple_main_edges(), [("X", "Z")])
        return edges + [("X", "U_D"), ("U_D", "Z"), ("U_D", "R")], ()
    if pid is P.DOWNSTREAM_NONIGNORABLE:
        edges = _without(_simple_main_edges(), [("Z", "Y")])
        return edges + [("Z", "U_D"), ("U_D", "Y"), ("U_D", "R")], ()
    if pid is P.ER:
        edges = _without(_simple_main_edges(), [("Z", "Y")])
        return edges + [("X", "R"), ("Z", "R"), ("S", "R")], ()
    if pid in (P.PI_1, P.PI_2):
        u = ("U_VS", "S") if pid is P.PI_1 else ("U_VY", "Y")
        edges = list(MAIN_EDGES) + [("V", "S"), ("V", "Y"), (u[0], "V"), u]
        return edges + [("X", "R"), ("Z", "R"), ("S", "R"), ("V", "R")], ()
    dm_b = _without(_dm_a_edges(), drop_nodes=["U_RS"])
    if pid is P.CANONICAL_W:
        return dm_b + [("W", "Y"), ("W", "R")], ()
    if pid is P.INSTRUMENTAL_W:
        if variant == "R-arrow":
            return dm_b + [("U_RY", "Y"), ("U_RY", "W"), ("W", "R")], ()
        if variant == "Y-arrow":
            return dm_b + [("U_RY", "R"), ("U_RY", "W"), ("W", "Y")], ()
        if variant == "direct":
            return dm_b + [("Y", "W"), ("W", "R")], ()
        raise GraphError(f"unknown InstrumentalW variant {variant!r}; expected one of {INSTRUMENTAL_VARIANTS}")
    raise GraphError(f"unknown preset {pid!r}")


# unobserved causes removed from the general main model, chosen so that
# every submodel satisfies the four no-auxiliary MAR conditions
_GENERAL_SUBMODELS = {
    PresetId.GENERAL_MAIN_I: ("U_RX", "U_RS"),
    PresetId.GENERAL_MAIN_II: ("U_XY", "U_YS"),
    PresetId.GENERAL_MAIN_III: ("U_RX", "U_YS", "U_XS"),
    PresetId.GENERAL_MAIN_IV: ("U_XY", "U_RS", "U_XS"),
}


def preset(id, setting=Setting.TWO_SIDED, *, variant: str = "R-arrow") -> CausalGraph:
    """Build a named model as a DAG.

    Parameters
    ----------
    id : PresetId or str
    setting : Setting
        Accepted for symmetry with the rest of the API. The graphs are the
        same in both settings; one-sided noncompliance only constrains the
        mechanism of S.
    variant : str
        Placement of W in ``InstrumentalW``: ``"R-arrow"`` (W on the arrow into
        R), ``"Y-arrow"`` (W on the arrow into Y) or ``"direct"`` (W mediates
        Y -> R). Ignored for other presets.
    """
    Setting.coerce(setting)
    pid = PresetId.coerce(id)
    edges, extra = _edges_for(pid, variant)
    return _build(edges, extra)


def randomize_submodel(template, seed: int) -> CausalGraph:
    """Drop a random subset of the optional elements of ``template``.

    Optional elements are the Y -> R arrow, direct arrows from X, Z, S into
    R, every unobserved node and every arrow out of an unobserved node. Each
    is kept with probability 1/2. The observed main-model arrows are always
    kept, and an unobserved node left without children is removed.
    ``template`` is a preset id or a graph equal to one of the two presets.
    """
    if isinstance(template, CausalGraph):
        match = [p for p in (PresetId.DM, PresetId.GENERAL_MAIN) if preset(p) == template]
        if not match:
            raise GraphError("randomize_submodel needs the DM or GeneralMain graph")
        template = match[0]
    pid = PresetId.coerce(template)
    if pid not in (PresetId.DM, PresetId.GENERAL_MAIN):
        raise GraphError(f"randomize_submodel supports DM and GeneralMain, not {pid.value}")
    g = preset(pid)
    rng = np.random.default_rng(seed)
    u_nodes = [n.id for n in g.nodes if n.role is NodeRole.UNOBSERVED]
    optional = sorted(
        (e for e in g.edges if e.source in u_nodes or e.target == "R"),
        key=lambda e: (e.source, e.target),
    )
    keep_node = dict(zip(u_nodes, rng.random(len(u_nodes)) < 0.5))
    keep_edge = dict(zip(optional, rng.random(len(optional)) < 0.5))
    edges = []
    for e in sorted(g.edges, key=lambda e: (e.source, e.target)):
        if e in keep_edge and not keep_edge[e]:
            continue
        if e.source in keep_node and not keep_node[e.source]:
            continue
        edges.append(e)
    used = {e.source for e in edges}
    nodes = [n for n in g.nodes if n.role is not NodeRole.UNOBSERVED or n.id in used]
    return CausalGraph(nodes, edges, GraphKind.DAG)


def assignment_ignorable(g: CausalGraph) -> bool:
    """Structural check that X captures every common cause of Z with S or Y.

    Every unobserved parent of Z must reach neither S nor Y along a directed
    path that avoids the measured covariates.
    """
    z = g.role_node(NodeRole.TREATMENT_ASSIGNED)
    targets = {g.role_node(NodeRole.TREATMENT_RECEIVED), g.role_node(NodeRole.OUTCOME)} - {None}
    blocked = set(g.nodes_with_role(NodeRole.COVARIATE_X)) | set(g.nodes_with_role(NodeRole.COVARIATE_V))
    for u in g.parents(z):
        if g.node(u).role is not NodeRole.UNOBSERVED:
            continue
        stack, seen = [u], {u}
        while stack:
            v = stack.pop()
            for c in g.children(v):
                if c in targets:
                    return False
                if c not in seen and c not in blocked and c != z:
                    seen.add(c)
                    stack.append(c)
    return True


def u_nodes(g: CausalGraph):
    return [n.id for n in g.nodes if n.role is NodeRole.UNOBSERVED]


def has_edge(g: CausalGraph, a: str, b: str) -> bool:
    return g.has_edge(EdgeKind.CAUSAL, a, b)
