"""Command-line interface.

Every subcommand takes a model source: a path to a model file or
``preset:<ID>``. Reports are printed as text, or as JSON with ``--json``
(``schema_version`` 1). Exit codes: 0 success, 2 input error, 3 failed
identification assumption or positivity.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import io
import json
import sys
import warnings

import pandas as pd

from . import __version__
from .conditioning import ColliderFanWarning, condition
from .dot import export_dot
from .dsl import ModelFile, load_model, serialize_model
from .estimators import (
    ObservedTable,
    VariableMap,
    iv_effects,
    pce_with_missing,
    pi_effects,
)
from .exceptions import IdentificationError, PSMissingError
from .graph import CausalGraph, GraphKind, NodeRole
from .library import preset, randomize_submodel
from .missingness import check_box, classify_missingness, detect_structures, mnar_severity
from .oracle import StructuralModel, check_assumptions, factual_joint, random_model, sample, true_pce, write_csv
from .principal import to_principal_graph
from .strata import Setting

__all__ = ["main", "run_command", "build_parser", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

EXIT_OK, EXIT_INPUT, EXIT_IDENT = 0, 2, 3


class _UsageError(Exception):
    def __init__(self, message, usage):
        super().__init__(message)
        self.usage = usage


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message, self.format_usage())


def _id_list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("source", help="model file path or preset:<ID>")
    common.add_argument("--json", action="store_true", help="emit a JSON report")
    common.add_argument("--setting", choices=[s.value for s in Setting], help="override the file's setting")
    common.add_argument("--randomize", type=int, metavar="SEED", help="use a random submodel (DM / GeneralMain)")
    common.add_argument(
        "--param-seed", type=int, default=0, metavar="SEED",
        help="seed for random mechanisms when the source has none (default 0)",
    )

    p = _Parser(prog="psmissing", description="Principal stratification with missing outcomes.")
    p.add_argument("--version", action="version", version=f"psmissing {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sub.add_parser("transform", parents=[common], help="principal stratification graph")
    c = sub.add_parser("condition", parents=[common], help="conditional graph")
    c.add_argument("--on", required=True, help="conditioning spec, e.g. X,Z=1,S=1")
    k = sub.add_parser("classify", parents=[common], help="MAR / LMAR / MNAR verdict")
    k.add_argument("--w", type=_id_list, help="auxiliary set (default: the file's aux line)")
    s = sub.add_parser("structures", parents=[common], help="triangles, butterflies and direct paths")
    s.add_argument("--w", type=_id_list)
    b = sub.add_parser("check-box", parents=[common], help="auxiliary-variable box conditions")
    b.add_argument("--box", type=int, choices=(1, 2, 3), required=True)
    b.add_argument("--w", type=_id_list)
    b.add_argument("--arm", type=int, choices=(0, 1), help="treatment arm (default: all arms)")
    m = sub.add_parser("simulate", parents=[common], help="draw a CSV sample")
    m.add_argument("--n", type=int, required=True)
    m.add_argument("--seed", type=int, required=True)
    m.add_argument("--out", help="output CSV path (default: stdout)")
    e = sub.add_parser("estimate", parents=[common], help="principal causal effects")
    e.add_argument("--approach", choices=("iv", "pi"), required=True)
    e.add_argument("--missing", action="store_true", help="mask Y where R=0 and recover under MAR")
    e.add_argument("--data", help="CSV sample to estimate from (implies --missing)")
    e.add_argument("--w", type=_id_list)
    e.add_argument("--v", type=_id_list, help="extra covariates for the pi approach")
    sub.add_parser("oracle", parents=[common], help="true effects and assumption checks")
    d = sub.add_parser("export-dot", parents=[common], help="Graphviz DOT text")
    d.add_argument("--graph", choices=("dag", "ps", "conditional"), default="dag")
    d.add_argument("--on", help="conditioning spec for --graph conditional")
    return p


# -- helpers ---------------------------------------------------------------


def _load(args) -> ModelFile:
    src = args.source
    if src.startswith("preset:"):
        g = preset(src.split(":", 1)[1])
        mf = ModelFile(g, None, Setting.TWO_SIDED)
    else:
        mf = load_model(src)
    if args.setting:
        setting = Setting.coerce(args.setting)
        model = mf.model
        if model is not None and model.setting is not setting:
            model = StructuralModel(model.graph, model.mechanisms, setting)
        mf = ModelFile(mf.graph, model, setting, mf.aux, True, mf.lines)
    if args.randomize is not None:
        g = randomize_submodel(mf.graph, args.randomize)
        aux = tuple(w for w in mf.aux if w in g)
        mf = ModelFile(g, None, mf.setting, aux, mf.setting_given, {})
    return mf


def _model(mf: ModelFile, args) -> StructuralModel:
    if mf.model is not None:
        return mf.model
    return random_model(mf.graph, args.param_seed, mf.setting)


def _dag(mf: ModelFile) -> CausalGraph:
    if mf.graph.kind is not GraphKind.DAG:
        raise PSMissingError("this command needs a dag model")
    return mf.graph


def _w(args, mf):
    w = getattr(args, "w", None)
    return tuple(mf.aux if w is None else w)


def graph_dict(g: CausalGraph) -> dict:
    pos = {v: i for i, v in enumerate(g.ids)}
    edges = sorted(g.edges, key=lambda e: (e.kind.value, pos[e.source], pos[e.target]))
    return {
        "kind": g.kind.value,
        "nodes": [{"id": n.id, "role": n.role.value, "tag": n.tag} for n in g.nodes],
        "edges": [str(e) for e in edges],
    }


def _roles(g: CausalGraph) -> VariableMap:
    R = NodeRole
    return VariableMap(
        x=g.nodes_with_role(R.COVARIATE_X),
        v=g.nodes_with_role(R.COVARIATE_V),
        w=g.nodes_with_role(R.AUXILIARY_W),
        z=g.role_node(R.TREATMENT_ASSIGNED),
        s=g.role_node(R.TREATMENT_RECEIVED),
        y=g.role_node(R.OUTCOME),
        r=g.role_node(R.RESPONSE),
    )


def _text(obj, indent=0) -> str:
    pad = "  " * indent
    lines = []
    if isinstance(obj, dict):
        for k, v in obj.items():
            if isinstance(v, (dict, list)) and v:
                lines.append(f"{pad}{k}:")
                lines.append(_text(v, indent + 1))
            else:
                lines.append(f"{pad}{k}: {_scalar(v)}")
    elif isinstance(obj, list):
        for v in obj:
            if isinstance(v, dict):
                lines.append(f"{pad}-")
                lines.append(_text(v, indent + 1))
            else:
                lines.append(f"{pad}- {_scalar(v)}")
    else:
        lines.append(pad + _scalar(obj))
    return "\n".join(lines)


def _scalar(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if v is None:
        return "null"
    if isinstance(v, float):
        return f"{v:.12g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_scalar(x) for x in v) + "]"
    if isinstance(v, dict):
        return "{" + ", ".join(f"{k}: {_scalar(x)}" for k, x in v.items()) + "}"
    return str(v)


# -- commands --------------------------------------------------------------


def _cmd_transform(args, mf):
    ps = to_principal_graph(_dag(mf))
    return {"graph": graph_dict(ps)}, serialize_model(ps, setting=mf.setting if mf.setting_given else None)


def _cmd_condition(args, mf):
    g = mf.graph if mf.graph.kind is not GraphKind.DAG else to_principal_graph(mf.graph)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", ColliderFanWarning)
        cg = condition(g, args.on, mf.setting)
    notes = list(cg.warnings) + [str(w.message) for w in caught if str(w.message) not in cg.warnings]
    rep = {
        "setting": mf.setting.value,
        "on": str(cg.spec),
        "graph": graph_dict(cg.graph),
        "dropped": [{"id": v, "reason": cg.reasons.get(v, "")} for v in cg.dropped],
        "merged": dict(sorted(cg.merged.items())),
        "warnings": notes,
    }
    return rep, None


def _cmd_classify(args, mf):
    return classify_missingness(_dag(mf), mf.setting, _w(args, mf)).to_dict(), None


def _cmd_structures(args, mf):
    r = detect_structures(_dag(mf), _w(args, mf))
    rep = r.to_dict()
    rep["findings"] = [
        {"kind": f.kind, "witnesses": [list(w) if isinstance(w, tuple) else w for w in f.witnesses], "rationale": f.rationale}
        for f in mnar_severity(r)
    ]
    return rep, None


def _cmd_check_box(args, mf):
    arms = (args.arm,) if args.arm is not None else ((1, 0) if mf.setting is Setting.ONE_SIDED else (1,))
    reports = [check_box(_dag(mf), args.box, _w(args, mf), mf.setting, a).to_dict() for a in arms]
    return {"box": args.box, "passed": all(r["passed"] for r in reports), "arms": reports}, None


def _cmd_simulate(args, mf):
    m = _model(mf, args)
    df = sample(m, args.n, args.seed)
    text = write_csv(df)
    rep = {
        "rows": len(df),
        "columns": list(df.columns),
        "seed": args.seed,
        "sha256": hashlib.sha256(text.encode("utf-8")).hexdigest(),
    }
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        rep["out"] = args.out
        return rep, None
    return rep, text.rstrip("\n")


def _cmd_estimate(args, mf):
    g = _dag(mf)
    roles = _roles(g)
    w = _w(args, mf)
    v = args.v
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        if args.data:
            df = pd.read_csv(args.data, dtype="Int64")
            est = pce_with_missing(df, args.approach, mf.setting, v, w, graph=g, roles=roles)
            source = "data"
        else:
            fj = factual_joint(_model(mf, args))
            if args.missing:
                o = ObservedTable.from_joint(fj, roles)
                est = pce_with_missing(o, args.approach, mf.setting, v, w, graph=g, roles=roles)
                source = "exact-observed"
            else:
                if args.approach == "iv":
                    est = iv_effects(fj, mf.setting, roles)
                else:
                    est = pi_effects(fj, mf.setting, v, roles)
                source = "exact-full"
    rep = {"approach": args.approach, "source": source, **est.to_dict()}
    return rep, None


def _cmd_oracle(args, mf):
    m = _model(mf, args)
    rep = true_pce(m).to_dict()
    rep["assumptions"] = check_assumptions(m).to_dict()
    return rep, None


def _cmd_export_dot(args, mf):
    g = mf.graph
    if args.graph in ("ps", "conditional") and g.kind is GraphKind.DAG:
        g = to_principal_graph(g)
    if args.graph == "conditional":
        if not args.on:
            raise PSMissingError("--graph conditional needs --on")
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", ColliderFanWarning)
            g = condition(g, args.on, mf.setting).graph
    text = export_dot(g)
    return {"dot": text}, text.rstrip("\n")


_COMMANDS = {
    "transform": _cmd_transform,
    "condition": _cmd_condition,
    "classify": _cmd_classify,
    "structures": _cmd_structures,
    "check-box": _cmd_check_box,
    "simulate": _cmd_simulate,
    "estimate": _cmd_estimate,
    "oracle": _cmd_oracle,
    "export-dot": _cmd_export_dot,
}


def run_command(argv) -> tuple[int, str]:
    """Run one command; returns ``(exit code, report text)``.

    Errors are reported in the text (prefixed ``error:``) rather than raised.
    """
    parser = build_parser()
    try:
        with contextlib.redirect_stdout(io.StringIO()) as buf:
            args = parser.parse_args(list(argv))
    except _UsageError as exc:
        return EXIT_INPUT, f"{exc.usage}psmissing: error: {exc}"
    except SystemExit as exc:  # --help, --version
        return int(exc.code or 0), buf.getvalue().rstrip("\n")
    try:
        mf = _load(args)
        report, text = _COMMANDS[args.command](args, mf)
    except IdentificationError as exc:
        return EXIT_IDENT, _error(args, exc, "identification")
    except (PSMissingError, ValueError, KeyError, OSError) as exc:
        return EXIT_INPUT, _error(args, exc, "input")
    if args.json:
        doc = {"schema_version": SCHEMA_VERSION, "command": args.command, "source": args.source, "report": report}
        return EXIT_OK, json.dumps(doc, indent=2, sort_keys=False, allow_nan=False)
    return EXIT_OK, text if text is not None else _text(report)


def _error(args, exc, kind) -> str:
    msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else str(exc)
    if args.json:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": args.command,
            "source": args.source,
            "error": {"kind": kind, "type": type(exc).__name__, "message": str(msg)},
        }
        return json.dumps(doc, indent=2)
    return f"error: {msg}"


def main(argv=None) -> int:
    code, text = run_command(sys.argv[1:] if argv is None else argv)
    stream = sys.stdout if code == EXIT_OK else sys.stderr
    if text:
        stream.write(text + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
