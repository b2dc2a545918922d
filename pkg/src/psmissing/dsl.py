"""Line-oriented model files.

Grammar (one statement per line, ``#`` starts a comment)::

    setting one-sided|two-sided
    graph dag|ps-graph|conditional          # optional, default dag
    node <id> kind=<role> [tag=<text>]
    edge <id> -> <id>                       # causal
    edge <id> => <id>                       # deterministic (ps-graphs)
    edge <id> -- <id>                       # dashed (conditional graphs)
    prior <id> <p>                          # P(id = 1) for a parentless node
    mech <id> parents=<id,...> table=<p,...>
    aux <id,...>                            # the auxiliary set W

``<role>`` is one of covariate, aux_v, aux_w, treatment_assigned,
treatment_received, outcome, response, unobserved (plus stratum and
constant for derived graphs). Unobserved nodes default to ``tag=<id>``.

A ``mech`` table lists ``P(id = 1 | parents)`` for every parent
configuration in binary-counting order with the first listed parent as the
most significant bit: for ``parents=A,B`` the entries are for
(A,B) = (0,0), (0,1), (1,0), (1,1). Either every node has a ``prior`` or
``mech`` line or none does.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .exceptions import ModelError, ParseError
from .graph import NODE_ID, CausalGraph, Edge, EdgeKind, GraphKind, Node, NodeRole, validate_graph
from .oracle import Mechanism, StructuralModel
from .strata import Setting

__all__ = ["ModelFile", "parse_model", "serialize_model", "load_model"]

_KEYWORDS = ("setting", "graph", "node", "edge", "prior", "mech", "aux")
_EDGE_OPS = {k.value: k for k in EdgeKind}


@dataclass
class ModelFile:
    """Parsed contents of a model file."""

    graph: CausalGraph
    model: StructuralModel | None = None
    setting: Setting = Setting.TWO_SIDED
    aux: tuple = ()
    setting_given: bool = False
    lines: dict = field(default_factory=dict)

    def __iter__(self):
        # allows ``graph, model = parse_model(text)``
        yield self.graph
        yield self.model


def _prob(text, line):
    try:
        p = float(text)
    except ValueError:
        raise ParseError(f"not a number: {text!r}", line) from None
    if not 0.0 <= p <= 1.0:
        raise ParseError(f"probability {text} outside [0, 1]", line)
    return p


def _ids(text, line):
    ids = [t.strip() for t in text.split(",") if t.strip()]
    for v in ids:
        if not NODE_ID.match(v):
            raise ParseError(f"invalid node id {v!r}", line)
    if len(set(ids)) != len(ids):
        raise ParseError("repeated id in list", line)
    return ids


def _options(tokens, line, allowed):
    out = {}
    for tok in tokens:
        if "=" not in tok:
            raise ParseError(f"expected key=value, got {tok!r}", line)
        k, v = tok.split("=", 1)
        if k not in allowed:
            raise ParseError(f"unknown option {k!r}", line)
        if k in out:
            raise ParseError(f"option {k!r} given twice", line)
        out[k] = v
    return out


def _reaches(children, a, b):
    seen, stack = set(), [a]
    while stack:
        u = stack.pop()
        if u == b:
            return True
        if u in seen:
            continue
        seen.add(u)
        stack.extend(children.get(u, ()))
    return False


def parse_model(text: str) -> ModelFile:
    """Parse a model file.

    Returns
    -------
    ModelFile
        Unpacks as ``(graph, model)``; ``model`` is None without mechanisms.

    Raises
    ------
    ParseError
        With the offending line number where one applies.
    """
    setting, setting_line = None, None
    kind = GraphKind.DAG
    nodes, node_line = [], {}
    edges, edge_line = [], {}
    children = {}
    mechs, mech_line = {}, {}
    aux, aux_line = None, None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        kw, args = tokens[0], tokens[1:]
        if kw not in _KEYWORDS:
            raise ParseError(f"unknown keyword {kw!r}", lineno)
        if kw == "setting":
            if len(args) != 1:
                raise ParseError("usage: setting one-sided|two-sided", lineno)
            if setting is not None:
                raise ParseError("setting given twice", lineno)
            try:
                setting = Setting.coerce(args[0])
            except ValueError:
                raise ParseError(f"unknown setting {args[0]!r}", lineno) from None
            setting_line = lineno
        elif kw == "graph":
            if len(args) != 1:
                raise ParseError("usage: graph dag|ps-graph|conditional", lineno)
            try:
                kind = GraphKind(args[0])
            except ValueError:
                raise ParseError(f"unknown graph kind {args[0]!r}", lineno) from None
        elif kw == "node":
            if not args:
                raise ParseError("usage: node <id> kind=<role>", lineno)
            v = args[0]
            if not NODE_ID.match(v):
                raise ParseError(f"invalid node id {v!r}", lineno)
            if v in node_line:
                raise ParseError(f"duplicate node {v} (first declared on line {node_line[v]})", lineno)
            opts = _options(args[1:], lineno, ("kind", "tag"))
            if "kind" not in opts:
                raise ParseError(f"node {v} needs kind=<role>", lineno)
            try:
                role = NodeRole(opts["kind"])
            except ValueError:
                raise ParseError(f"unknown node kind {opts['kind']!r}", lineno) from None
            tag = opts.get("tag", v if role is NodeRole.UNOBSERVED else None)
            nodes.append(Node(v, role, tag))
            node_line[v] = lineno
        elif kw == "edge":
            if len(args) != 3 or args[1] not in _EDGE_OPS:
                raise ParseError("usage: edge <id> -> <id> (or =>, --)", lineno)
            a, op, b = args
            for v in (a, b):
                if v not in node_line:
                    raise ParseError(f"edge uses undeclared node {v}", lineno)
            e = Edge(_EDGE_OPS[op], a, b)
            if e in edge_line:
                raise ParseError(f"duplicate edge {e} (line {edge_line[e]})", lineno)
            if e.directed:
                if a == b:
                    raise ParseError(f"cycle: self-loop on {a}", lineno)
                if _reaches(children, b, a):
                    raise ParseError(f"cycle: edge {e} closes a directed cycle", lineno)
                children.setdefault(a, []).append(b)
            elif a == b:
                raise ParseError(f"dashed self-loop on {a}", lineno)
            edges.append(e)
            edge_line[e] = lineno
        elif kw == "prior":
            if len(args) != 2:
                raise ParseError("usage: prior <id> <p>", lineno)
            v = args[0]
            if v in mechs:
                raise ParseError(f"second mechanism for {v} (line {mech_line[v]})", lineno)
            mechs[v] = ((), [_prob(args[1], lineno)])
            mech_line[v] = lineno
        elif kw == "mech":
            if not args:
                raise ParseError("usage: mech <id> parents=<ids> table=<ps>", lineno)
            v = args[0]
            if v in mechs:
                raise ParseError(f"second mechanism for {v} (line {mech_line[v]})", lineno)
            opts = _options(args[1:], lineno, ("parents", "table"))
            if "table" not in opts:
                raise ParseError(f"mech {v} needs table=", lineno)
            parents = tuple(_ids(opts.get("parents", ""), lineno))
            table = [_prob(t, lineno) for t in opts["table"].split(",") if t.strip()]
            if len(table) != 2 ** len(parents):
                raise ParseError(
                    f"mech table of {v} has {len(table)} entries, expected {2 ** len(parents)}", lineno
                )
            mechs[v] = (parents, table)
            mech_line[v] = lineno
        elif kw == "aux":
            if aux is not None:
                raise ParseError("aux given twice", lineno)
            aux = tuple(_ids(" ".join(args), lineno))
            aux_line = lineno
    graph = CausalGraph(nodes, edges, kind)
    problems = validate_graph(graph)
    if problems:
        line = None
        for p in problems:
            for v, ln in node_line.items():
                if f" {v} " in f" {p} ":
                    line = ln
                    break
            if line:
                break
        raise ParseError("; ".join(problems), line)
    for v in aux or ():
        if v not in graph:
            raise ParseError(f"aux names unknown node {v}", aux_line)
        if graph.node(v).role is not NodeRole.AUXILIARY_W:
            raise ParseError(f"aux node {v} must have kind=aux_w", aux_line)
    setting_val = setting or Setting.TWO_SIDED
    model = None
    if mechs:
        for v in mechs:
            if v not in graph:
                raise ParseError(f"mechanism for undeclared node {v}", mech_line[v])
        for v in graph.ids:
            if v not in mechs:
                raise ParseError(f"node {v} has no prior or mech line (needed once any mechanism is given)", node_line[v])
            parents = mechs[v][0]
            if set(parents) != set(graph.parents(v)):
                raise ParseError(
                    f"mech parents of {v} ({', '.join(parents) or 'none'}) differ from its graph parents "
                    f"({', '.join(graph.parents(v)) or 'none'})",
                    mech_line[v],
                )
        try:
            model = StructuralModel(graph, {v: Mechanism(*mechs[v]) for v in graph.ids}, setting_val)
        except ModelError as exc:
            raise ParseError(str(exc), setting_line) from None
    lines = {"nodes": node_line, "edges": {str(e): ln for e, ln in edge_line.items()}, "mechs": mech_line}
    return ModelFile(graph, model, setting_val, tuple(aux or ()), setting is not None, lines)


def load_model(path) -> ModelFile:
    with open(path, encoding="utf-8") as fh:
        return parse_model(fh.read())


def _fmt(p) -> str:
    return repr(float(p))


def serialize_model(graph: CausalGraph, model: StructuralModel | None = None, *, setting=None, aux=()) -> str:
    """Model-file text for ``graph`` (and ``model``); the inverse of :func:`parse_model`."""
    if model is not None and setting is None:
        setting = model.setting
    out = []
    if setting is not None:
        out.append(f"setting {Setting.coerce(setting).value}")
    if graph.kind is not GraphKind.DAG:
        out.append(f"graph {graph.kind.value}")
    for n in graph.nodes:
        line = f"node {n.id} kind={n.role.value}"
        default_tag = n.id if n.role is NodeRole.UNOBSERVED else None
        if n.tag != default_tag:
            if n.tag is None or any(c.isspace() or c == "#" for c in n.tag):
                raise ValueError(f"tag of {n.id} cannot be written to a model file")
            line += f" tag={n.tag}"
        out.append(line)
    pos = {v: i for i, v in enumerate(graph.ids)}
    kinds = list(EdgeKind)
    for e in sorted(graph.edges, key=lambda e: (kinds.index(e.kind), pos[e.source], pos[e.target])):
        out.append(f"edge {e.source} {e.kind.value} {e.target}")
    if aux:
        out.append("aux " + ",".join(aux))
    if model is not None:
        for v in graph.ids:
            m = model.mechanisms[v]
            if not m.parents:
                out.append(f"prior {v} {_fmt(m.table[0])}")
            else:
                out.append(f"mech {v} parents={','.join(m.parents)} table={','.join(_fmt(p) for p in m.table)}")
    return "\n".join(out) + "\n"
