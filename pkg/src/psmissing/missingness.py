"""MAR / LMAR / MNAR verdicts, structural patterns and auxiliary-variable checks.

Verdicts are separation queries on conditional principal-stratification
graphs. The box checks restate the same question as structural patterns:
a direct Y -> R influence, shared unobserved causes of Y and R
(triangles), and butterflies, where a conditioned node has unobserved causes
shared with Y on one side and with R on the other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Iterable

from .conditioning import ColliderFanWarning, ConditionalGraph, condition
from .exceptions import GraphError
from .graph import CausalGraph, Edge, GraphKind, NodeRole, enumerate_active_paths, m_separated
from .principal import STRATUM_ID, to_principal_graph
from .strata import Setting

__all__ = [
    "MissingnessVerdict",
    "ArmVerdict",
    "classify_missingness",
    "arm_graph",
    "StructureReport",
    "detect_structures",
    "BoxReport",
    "check_box",
    "Finding",
    "mnar_severity",
    "control_arm_aux",
    "LABELS",
]

LABELS = ("MAR", "LMAR-and-MAR", "MNAR", "MAR-not-LMAR")


# -- verdicts --------------------------------------------------------------


@dataclass(frozen=True)
class ArmVerdict:
    z: int
    mar: bool
    lmar: bool | None
    graph: ConditionalGraph = field(repr=False, compare=False, default=None)
    mar_given: tuple = ()
    lmar_given: tuple = ()
    mar_paths: tuple = ()
    lmar_paths: tuple = ()

    @property
    def label(self) -> str:
        return _label(self.mar, self.lmar)


def _label(mar: bool, lmar: bool | None) -> str:
    if not mar:
        return "MNAR"
    if lmar is None:
        return "MAR"
    return "LMAR-and-MAR" if lmar else "MAR-not-LMAR"


@dataclass(frozen=True)
class MissingnessVerdict:
    """Per-arm missingness flags for one model and setting.

    ``flags`` holds ``mar1, mar0, lmar0`` in the one-sided setting and
    ``mar_z1, mar_z0, lmar_z1, lmar_z0`` in the two-sided setting; each flag
    is also available as an attribute. In the one-sided treated arm, C and S
    coincide so LMAR there is the same statement as MAR.
    """

    setting: Setting
    flags: dict
    overall_label: str
    arms: dict = field(repr=False, default_factory=dict)
    w_set: tuple = ()

    def __getattr__(self, name):
        flags = self.__dict__.get("flags", {})
        if name in flags:
            return flags[name]
        raise AttributeError(name)

    @property
    def mar(self) -> bool:
        return all(a.mar for a in self.arms.values())

    @property
    def lmar(self) -> bool | None:
        vals = [a.lmar for a in self.arms.values()]
        if any(v is None for v in vals):
            return None
        return all(vals)

    def arm_label(self, z: int) -> str:
        return self.arms[z].label

    def to_dict(self) -> dict:
        return {
            "setting": self.setting.value,
            "w_set": list(self.w_set),
            "flags": dict(self.flags),
            "arms": {
                str(z): {
                    "label": a.label,
                    "mar": a.mar,
                    "lmar": a.lmar,
                    "mar_given": list(a.mar_given),
                    "lmar_given": list(a.lmar_given),
                    "mar_paths": list(a.mar_paths),
                    "lmar_paths": list(a.lmar_paths),
                }
                for z, a in sorted(self.arms.items(), reverse=True)
            },
            "overall_label": self.overall_label,
        }


def _as_dag(model) -> CausalGraph:
    g = getattr(model, "graph", model)
    if isinstance(g, ConditionalGraph):
        raise GraphError("expected a dag, got a conditional graph")
    if g.kind is not GraphKind.DAG:
        raise GraphError(f"expected a dag, got a {g.kind.value} graph")
    return g


def _check_w(g: CausalGraph, w_set) -> tuple[str, ...]:
    w_set = tuple(sorted(set(w_set or ())))
    g.check_ids(w_set)
    for w in w_set:
        role = g.node(w).role
        if not role.observed:
            raise GraphError(f"auxiliary set may only contain observed nodes; {w} is unobserved")
    return w_set


def _needs_query(g: CausalGraph, v: str, plan: list[str]) -> bool:
    """True if conditioning on ``v`` by node removal would lose dependence.

    That happens when ``v`` has an ancestor that is a collider, that is,
    some parent of ``v`` has causes that are not conditioned on earlier.
    """
    done = set(plan)
    for p in g.parents(v):
        if p in done:
            continue
        if any(q not in done for q in g.parents(p)):
            return True
    return False


def arm_graph(model, setting, z: int, w_set=()):
    """Conditional ps-graph for arm ``z`` plus nodes left for the separation query.

    Returns
    -------
    cg : ConditionalGraph
    extra : tuple of str
        Conditioned nodes kept in the graph and passed as ``given`` to
        separation queries (auxiliary nodes downstream of S, for example).
    """
    setting = Setting.coerce(setting)
    dag = _as_dag(model)
    w_set = _check_w(dag, w_set)
    ps = to_principal_graph(dag)
    z_id = ps.role_node(NodeRole.TREATMENT_ASSIGNED)
    if z_id is None or ps.role_node(NodeRole.RESPONSE) is None or ps.role_node(NodeRole.OUTCOME) is None:
        raise GraphError("model needs Z, Y and R nodes")
    wanted = set(ps.nodes_with_role(NodeRole.COVARIATE_X)) | set(ps.nodes_with_role(NodeRole.COVARIATE_V))
    wanted |= set(w_set) | {z_id}
    s_id = ps.role_node(NodeRole.TREATMENT_RECEIVED)
    downstream = ps.descendants(STRATUM_ID) | {STRATUM_ID, s_id}
    plan, extra = [], []
    for v in ps.topological_order():
        if v not in wanted:
            continue
        if v in downstream or any(e in ps.ancestors(v) for e in extra) or _needs_query(ps, v, plan):
            extra.append(v)
        else:
            plan.append(v)
    items = [(v, z if v == z_id else None) for v in plan]
    with warnings.catch_warnings():
        # nodes whose collider fan matters were routed to ``extra`` above
        warnings.simplefilter("ignore", ColliderFanWarning)
        cg = condition(ps, items, setting)
    return cg, tuple(extra)


def _resolve_given(cg: ConditionalGraph, ids):
    out = []
    for v in ids:
        r = cg.resolve(v)
        if r in cg.graph and r not in out:
            out.append(r)
    return out


def classify_missingness(model, setting, w_set=(), *, lmar: bool = True) -> MissingnessVerdict:
    """MAR and LMAR flags for each treatment arm.

    For arm ``z`` the principal-stratification graph is conditioned on the
    covariates, the auxiliary set and ``Z=z``. MAR holds in the arm when R
    and Y are separated given S (or nothing, if S dropped out as a
    constant); LMAR holds when they are separated given C, which also fixes
    S through the deterministic edge.

    Parameters
    ----------
    model : CausalGraph or StructuralModel
        A DAG (the principal-stratification graph is built internally).
    setting : Setting
    w_set : iterable of str
        Auxiliary variables added to the conditioning set.
    lmar : bool
        Also evaluate LMAR. When False the overall label is ``MAR`` or
        ``MNAR``.
    """
    setting = Setting.coerce(setting)
    dag = _as_dag(model)
    w_set = _check_w(dag, w_set)
    s_id = dag.role_node(NodeRole.TREATMENT_RECEIVED)
    r_id = dag.role_node(NodeRole.RESPONSE)
    y_id = dag.role_node(NodeRole.OUTCOME)
    arms = {}
    for z in (1, 0):
        cg, extra = arm_graph(dag, setting, z, w_set)
        g = cg.graph
        r, y = cg.resolve(r_id), cg.resolve(y_id)
        mar_given = _resolve_given(cg, [s_id, *extra])
        mar = m_separated(g, r, y, mar_given)
        mar_paths = () if mar else tuple(str(p) for p in enumerate_active_paths(g, r, y, mar_given))
        lmar_flag, lmar_given, lmar_paths = None, (), ()
        if lmar:
            lmar_given = _resolve_given(cg, [STRATUM_ID, *extra])
            lmar_flag = m_separated(g, r, y, lmar_given)
            if not lmar_flag:
                lmar_paths = tuple(str(p) for p in enumerate_active_paths(g, r, y, lmar_given))
        arms[z] = ArmVerdict(z, mar, lmar_flag, cg, tuple(mar_given), tuple(lmar_given), mar_paths, lmar_paths)

    if setting is Setting.ONE_SIDED:
        flags = {"mar1": arms[1].mar, "mar0": arms[0].mar}
        if lmar:
            flags["lmar0"] = arms[0].lmar
    else:
        flags = {"mar_z1": arms[1].mar, "mar_z0": arms[0].mar}
        if lmar:
            flags["lmar_z1"] = arms[1].lmar
            flags["lmar_z0"] = arms[0].lmar
    mar_all = arms[1].mar and arms[0].mar
    lmar_all = None if not lmar else (arms[1].lmar and arms[0].lmar)
    return MissingnessVerdict(setting, flags, _label(mar_all, lmar_all), arms, w_set)


# -- structures ------------------------------------------------------------


def _reach(g: CausalGraph, u: str, target: str, avoid: set) -> bool:
    """Directed path u -> ... -> target whose interior avoids ``avoid``."""
    stack, seen = [u], {u}
    while stack:
        v = stack.pop()
        for c in g.children(v):
            if c == target:
                return True
            if c in avoid or c in seen:
                continue
            seen.add(c)
            stack.append(c)
    return False


def _leg_edges(g: CausalGraph, u: str, target: str, avoid: set) -> set:
    """Edges lying on directed paths from ``u`` to ``target`` avoiding ``avoid``."""
    forward = {u}
    stack = [u]
    while stack:
        v = stack.pop()
        for c in g.children(v):
            if c not in forward and c not in avoid and c != target:
                forward.add(c)
                stack.append(c)
    backward = {target}
    stack = [target]
    while stack:
        v = stack.pop()
        for p in g.parents(v):
            if p not in backward and p in forward:
                backward.add(p)
                stack.append(p)
    on_path = forward & backward | {u, target}
    return {
        e
        for e in g.edges
        if e.directed and e.source in on_path and e.target in on_path and e.source in forward and e.source != target
    }


@dataclass(frozen=True)
class Butterfly:
    center: str
    shared_y: tuple
    shared_r: tuple

    @property
    def present(self) -> bool:
        return bool(self.shared_y) and bool(self.shared_r)

    @property
    def witnesses(self) -> tuple:
        pairs = [(a, b) for a in self.shared_r for b in self.shared_y if a != b]
        if not pairs and self.present:
            pairs = [(self.shared_r[0], self.shared_y[0])]
        return tuple(pairs)


@dataclass(frozen=True)
class StructureReport:
    """Structural patterns relevant to MAR.

    Candidates for shared causes are unobserved nodes plus auxiliary nodes
    outside ``w_set``. Paths defining "shared" are directed and avoid the
    analysis set (X, V, Z, S) in their interior.
    """

    has_direct_path: bool
    direct_paths: tuple
    triangles: tuple
    x_butterfly: bool
    x_witnesses: tuple
    s_butterfly: bool
    s_witnesses: tuple
    w_butterflies: dict
    downstream_nonignorable: tuple
    centers: dict = field(repr=False, default_factory=dict)
    w_set: tuple = ()

    def to_dict(self) -> dict:
        return {
            "w_set": list(self.w_set),
            "has_direct_path": self.has_direct_path,
            "direct_paths": [list(p) for p in self.direct_paths],
            "triangles": list(self.triangles),
            "x_butterfly": self.x_butterfly,
            "x_witnesses": [list(p) for p in self.x_witnesses],
            "s_butterfly": self.s_butterfly,
            "s_witnesses": [list(p) for p in self.s_witnesses],
            "w_butterflies": {w: [list(p) for p in ws] for w, ws in self.w_butterflies.items()},
            "downstream_nonignorable": list(self.downstream_nonignorable),
        }


class _Roles:
    def __init__(self, g: CausalGraph, w_set):
        self.g = g
        self.y = g.role_node(NodeRole.OUTCOME)
        self.r = g.role_node(NodeRole.RESPONSE)
        self.s = g.role_node(NodeRole.TREATMENT_RECEIVED)
        self.z = g.role_node(NodeRole.TREATMENT_ASSIGNED)
        if self.y is None or self.r is None:
            raise GraphError("model needs Y and R nodes")
        self.x = g.nodes_with_role(NodeRole.COVARIATE_X) + g.nodes_with_role(NodeRole.COVARIATE_V)
        self.w_set = tuple(w_set)
        self.k = set(self.x) | {self.z, self.s} - {None}
        self.candidates = [
            n.id
            for n in g.nodes
            if n.role is NodeRole.UNOBSERVED or (n.role is NodeRole.AUXILIARY_W and n.id not in w_set)
        ]

    def shared(self, center, target, other, extra_avoid=()):
        g = self.g
        avoid = set(self.k) | set(extra_avoid)
        found = []
        for u in self.candidates:
            if u == center:
                continue
            if _reach(g, u, center, avoid | {target, other}) and _reach(g, u, target, avoid | {center, other}):
                found.append(u)
        return tuple(found)

    def butterfly(self, center, extra_avoid=()):
        return Butterfly(
            center,
            self.shared(center, self.y, self.r, extra_avoid),
            self.shared(center, self.r, self.y, extra_avoid),
        )

    def triangles(self, extra_avoid=()):
        avoid = set(self.k) | set(extra_avoid)
        return tuple(
            u
            for u in self.candidates
            if _reach(self.g, u, self.y, avoid | {self.r}) and _reach(self.g, u, self.r, avoid | {self.y})
        )

    def direct_paths(self, avoid_extra=()):
        """Directed Y -> R paths with interior outside the analysis set."""
        g = self.g
        avoid = set(self.k) | set(avoid_extra)
        out = []

        def walk(path):
            v = path[-1]
            for c in g.children(v):
                if c == self.r:
                    out.append(tuple(path) + (c,))
                elif c not in avoid and c not in path:
                    walk(path + [c])

        walk([self.y])
        return tuple(out)


def detect_structures(model, w_set=()) -> StructureReport:
    """Structural MAR patterns of a DAG.

    Parameters
    ----------
    model : CausalGraph or StructuralModel
    w_set : iterable of str
        Auxiliary variables treated as measured. They stop counting as
        candidate shared causes and each gets a butterfly report.
    """
    g = _as_dag(model)
    w_set = _check_w(g, w_set)
    ro = _Roles(g, w_set)
    direct = ro.direct_paths()
    centers = {}
    x_wit, x_any = [], False
    for x in ro.x:
        b = ro.butterfly(x)
        centers[x] = b
        if b.present:
            x_any = True
            x_wit.extend(b.witnesses)
    s_b = ro.butterfly(ro.s) if ro.s is not None else Butterfly(None, (), ())
    if ro.s is not None:
        centers[ro.s] = s_b
    w_bf = {}
    for w in w_set:
        b = ro.butterfly(w, extra_avoid=set(w_set) - {w})
        centers[w] = b
        w_bf[w] = b.witnesses if b.present else ()
    downstream = tuple(
        n.id
        for n in g.nodes
        if n.role is NodeRole.UNOBSERVED
        and g.parents(n.id)
        and ro.y in g.children(n.id)
        and ro.r in g.children(n.id)
    )
    return StructureReport(
        has_direct_path=bool(direct),
        direct_paths=direct,
        triangles=ro.triangles(),
        x_butterfly=x_any,
        x_witnesses=tuple(x_wit),
        s_butterfly=s_b.present,
        s_witnesses=s_b.witnesses,
        w_butterflies=w_bf,
        downstream_nonignorable=downstream,
        centers=centers,
        w_set=w_set,
    )


# -- boxes -----------------------------------------------------------------


@dataclass(frozen=True)
class BoxReport:
    """Per-condition results of one box check. ``passed`` is the conjunction."""

    box: int
    flags: dict
    witnesses: dict
    w_set: tuple = ()
    setting: Setting = Setting.TWO_SIDED
    arm: int = 1

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    @property
    def failed(self) -> tuple:
        return tuple(k for k, v in self.flags.items() if not v)

    def to_dict(self) -> dict:
        return {
            "box": self.box,
            "setting": self.setting.value,
            "arm": self.arm,
            "w_set": list(self.w_set),
            "flags": dict(self.flags),
            "passed": self.passed,
            "witnesses": {k: [list(w) if isinstance(w, tuple) else w for w in v] for k, v in self.witnesses.items()},
        }


def _blocked(ro: _Roles, u: str, a: str, b: str, target_avoid: set) -> bool:
    """Do the W nodes block every a - b path through the directed legs from ``u``?"""
    g = ro.g
    edges = _leg_edges(g, u, a, target_avoid | {b}) | _leg_edges(g, u, b, target_avoid | {a})
    nodes = {v for e in edges for v in e.endpoints} | {a, b}
    sub = CausalGraph([n for n in g.nodes if n.id in nodes], edges, GraphKind.DAG)
    given = [w for w in ro.w_set if w in nodes and w not in (a, b)]
    return m_separated(sub, a, b, given)


def _captured(ro: _Roles, u: str, target: str, other: str, center=None) -> bool:
    """Canonical capture: u is measured, or every leg runs through a W node."""
    if u in ro.w_set:
        return True
    avoid = set(ro.k) | set(ro.w_set)
    legs = [(target, {other} | ({center} if center else set()))]
    if center is not None:
        legs.append((center, {target, other}))
    else:
        legs.append((other, {target}))
    return all(not _reach(ro.g, u, t, avoid | a) for t, a in legs)


def check_box(model, box: int, w_set=(), setting=Setting.TWO_SIDED, arm: int = 1) -> BoxReport:
    """Evaluate the MAR conditions of box 1, 2 or 3.

    Box 1 uses no auxiliary variables. Box 2 treats ``w_set`` as canonical
    auxiliaries: a shared cause only stops counting if it is in ``w_set`` or
    each of its legs runs through ``w_set``. Box 3 also accepts
    instrumental auxiliaries: a structure is controlled if conditioning on
    ``w_set`` separates the two ends of one side of it.

    Condition (iv) holds automatically in the control arm under one-sided
    noncompliance, where S is constant.
    """
    if box not in (1, 2, 3):
        raise ValueError(f"box must be 1, 2 or 3, got {box!r}")
    setting = Setting.coerce(setting)
    g = _as_dag(model)
    w_set = _check_w(g, w_set)
    for w in w_set:
        if g.node(w).role is not NodeRole.AUXILIARY_W:
            raise GraphError(f"{w} is not an auxiliary (aux_w) node")
    if box == 1 and w_set:
        raise ValueError("box 1 takes no auxiliary variables")
    if arm not in (0, 1):
        raise ValueError("arm must be 0 or 1")
    ro = _Roles(g, w_set)
    plain = _Roles(g, ())
    flags, wit = {}, {}
    s_free = setting is Setting.ONE_SIDED and arm == 0

    # (i) direct influence of Y on R
    if box == 3:
        paths = ro.direct_paths(avoid_extra=w_set)
    else:
        paths = plain.direct_paths()
    flags["i"] = not paths
    wit["i"] = [tuple(p) for p in paths]

    # (ii) shared causes of Y and R
    tri = plain.triangles()
    tri = [u for u in tri if u not in w_set]
    if box == 2:
        bad = [u for u in tri if not _captured(ro, u, ro.y, ro.r)]
    elif box == 3:
        avoid = set(ro.k)
        bad = [u for u in tri if not _blocked(ro, u, ro.y, ro.r, avoid)]
    else:
        bad = list(tri)
    flags["ii"] = not bad
    wit["ii"] = bad

    def side_ok(center, shared, target):
        if not shared:
            return True
        other = ro.r if target == ro.y else ro.y
        if box == 1:
            return False
        if box == 2:
            return all(_captured(ro, u, target, other, center) for u in shared)
        avoid = set(ro.k) - {center}
        return all(_blocked(ro, u, center, target, avoid | {other}) for u in shared)

    def butterfly_ok(center):
        b = plain.butterfly(center)
        shared_y = tuple(u for u in b.shared_y if u not in w_set)
        shared_r = tuple(u for u in b.shared_r if u not in w_set)
        if not (shared_y and shared_r):
            return True, ()
        if side_ok(center, shared_y, ro.y) or side_ok(center, shared_r, ro.r):
            return True, ()
        return False, Butterfly(center, shared_y, shared_r).witnesses

    # (iii) covariate butterflies
    ok, ws = True, []
    for x in ro.x:
        o, w = butterfly_ok(x)
        ok &= o
        ws.extend(w)
    flags["iii"] = ok
    wit["iii"] = ws

    # (iv) S-butterfly
    if s_free or ro.s is None:
        flags["iv"] = True
        wit["iv"] = []
    else:
        o, w = butterfly_ok(ro.s)
        flags["iv"] = o
        wit["iv"] = list(w)

    # (v) butterflies centred on the auxiliaries themselves
    if box in (2, 3):
        ws = []
        for w in w_set:
            centers = [w]
            if box == 3:
                centers += [p for p in g.parents(w) if g.node(p).role is NodeRole.UNOBSERVED]
            for c in centers:
                b = ro.butterfly(c, extra_avoid=set(w_set) - {c})
                if b.present:
                    ws.extend(b.witnesses)
        flags["v"] = not ws
        wit["v"] = ws
    return BoxReport(box, flags, wit, w_set, setting, arm)


# -- severity --------------------------------------------------------------


@dataclass(frozen=True)
class Finding:
    kind: str
    witnesses: tuple
    rationale: str


_RATIONALE = {
    "direct": "the outcome itself drives response, so no measured variable can remove the dependence",
    "triangle": "an unmeasured cause moves both outcome and response",
    "butterfly": (
        "dependence arises only as collider bias from conditioning on the centre node, "
        "which is indirect and usually weaker than a shared cause"
    ),
}


def mnar_severity(r: StructureReport) -> list[Finding]:
    """Findings of a structure report, most severe first.

    The order is direct path, then shared causes, then butterflies. It is a
    qualitative ranking; actual strength depends on the model parameters.
    """
    out = []
    if r.has_direct_path:
        out.append(Finding("direct", tuple(r.direct_paths), _RATIONALE["direct"]))
    if r.triangles:
        out.append(Finding("triangle", tuple(r.triangles), _RATIONALE["triangle"]))
    if r.x_butterfly:
        out.append(Finding("x-butterfly", tuple(r.x_witnesses), _RATIONALE["butterfly"]))
    if r.s_butterfly:
        out.append(Finding("s-butterfly", tuple(r.s_witnesses), _RATIONALE["butterfly"]))
    for w, ws in r.w_butterflies.items():
        if ws:
            out.append(Finding(f"w-butterfly:{w}", tuple(ws), _RATIONALE["butterfly"]))
    return out


# -- control-arm auxiliary subset ------------------------------------------


def control_arm_aux(model, w_set) -> tuple[str, ...]:
    """Subset W' of ``w_set`` for the control arm under one-sided noncompliance.

    A member is dropped when its only role is to defuse the S-butterfly in
    the treated arm: removing it changes no control-arm condition of box 3
    and, in the treated arm, changes nothing except condition (iv). Members
    are examined in sorted order and removed greedily.
    """
    g = _as_dag(model)
    kept = list(_check_w(g, w_set))
    for w in sorted(kept):
        trial = [v for v in kept if v != w]
        base1 = check_box(g, 3, kept, Setting.ONE_SIDED, 1).flags
        new1 = check_box(g, 3, trial, Setting.ONE_SIDED, 1).flags
        base0 = check_box(g, 3, kept, Setting.ONE_SIDED, 0).flags
        new0 = check_box(g, 3, trial, Setting.ONE_SIDED, 0).flags
        only_iv = base1["iv"] and not new1["iv"] and all(
            base1[k] == new1[k] for k in base1 if k not in ("iv", "v")
        )
        if only_iv and all(base0[k] == new0[k] for k in base0 if k != "v") and (new0["v"] or not base0["v"]):
            kept = trial
    return tuple(kept)


def _edges_str(edges: Iterable[Edge]):
    return sorted(str(e) for e in edges)
