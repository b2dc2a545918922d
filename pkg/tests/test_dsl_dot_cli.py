import hashlib
import json
import os

import numpy as np
import pydot
import pytest

from _helpers import json_close
from psmissing.cli import main, run_command
from psmissing.conditioning import condition
from psmissing.dot import export_dot
from psmissing.dsl import ParseError, load_model, parse_model, serialize_model
from psmissing.estimators import ObservedTable, mar_recover_mean
from psmissing.graph import CausalGraph, EdgeKind, GraphKind
from psmissing.library import PresetId, preset
from psmissing.oracle import factual_joint, random_model, true_pce
from psmissing.principal import to_principal_graph
from psmissing.strata import Setting

HERE = os.path.dirname(__file__)
DATA = os.path.join(HERE, "data")
GOLDEN = os.path.join(HERE, "golden")

# name -> argv; paths are relative to the tests directory
CASES = {
    "classify_dm_a_one_sided": ["classify", "preset:DM-a", "--setting", "one-sided", "--json"],
    "classify_dm_b_two_sided": ["classify", "data/dm_b.model", "--json"],
    "structures_dm": ["structures", "preset:DM", "--json"],
    "structures_general_main": ["structures", "preset:GeneralMain", "--json"],
    "check_box_canonical_w": ["check-box", "preset:CanonicalW", "--box", "2", "--w", "W", "--json"],
    "check_box_instrumental_w": ["check-box", "preset:InstrumentalW", "--box", "3", "--w", "W", "--json"],
    "condition_general_main_x": ["condition", "preset:GeneralMain", "--on", "X", "--json"],
    "transform_dm_b": ["transform", "data/dm_b.model", "--json"],
    "oracle_er": ["oracle", "data/er.model", "--json"],
    "estimate_er_iv": ["estimate", "data/er.model", "--approach", "iv", "--json"],
    "estimate_dm_gap_pi_missing": ["estimate", "data/dm_mnar_gap.model", "--approach", "pi", "--missing", "--json"],
    "simulate_er": ["simulate", "data/er.model", "--n", "200", "--seed", "7", "--json"],
}


@pytest.fixture
def in_tests(monkeypatch):
    monkeypatch.chdir(HERE)


def regenerate():
    """Rewrite the golden files from the current implementation."""
    cwd = os.getcwd()
    os.chdir(HERE)
    try:
        for name, argv in CASES.items():
            code, text = run_command(argv)
            assert code == 0, text
            with open(os.path.join(GOLDEN, name + ".json"), "w", encoding="utf-8") as fh:
                fh.write(text + "\n")
    finally:
        os.chdir(cwd)


# -- DSL ------------------------------------------------------------------------


def test_dm_b_file_equals_preset():
    mf = load_model(os.path.join(DATA, "dm_b.model"))
    assert mf.graph == preset("DM-b")
    assert mf.model is None and mf.setting is Setting.TWO_SIDED


@pytest.mark.parametrize("p", list(PresetId), ids=lambda p: p.value)
def test_round_trip_presets(p):
    g = preset(p)
    text = serialize_model(g)
    g2 = parse_model(text).graph
    assert g2 == g
    assert serialize_model(g2) == text


def test_round_trip_derived_graphs():
    for g in (to_principal_graph(preset("DM")), condition(to_principal_graph(preset("GeneralMain")), "X").graph):
        assert parse_model(serialize_model(g)).graph == g


def test_round_trip_models():
    for p, s in (("DM", Setting.TWO_SIDED), ("CanonicalW", Setting.ONE_SIDED)):
        m = random_model(preset(p), 5, s)
        mf = parse_model(serialize_model(m.graph, m, setting=s, aux=("W",) if p == "CanonicalW" else ()))
        assert mf.setting is s
        for v, mech in m.mechanisms.items():
            assert mf.model.mechanisms[v].parents == mech.parents
            assert np.array_equal(mf.model.mechanisms[v].table, mech.table)
        if p == "CanonicalW":
            assert mf.aux == ("W",)


def test_model_unpacks_as_pair():
    g, m = load_model(os.path.join(DATA, "er.model"))
    assert g == preset("ER") and m is not None


BAD = [
    ("node X kind=covariate\nnode X kind=covariate\n", 2, "duplicate"),
    ("node X kind=covariate\nedge X -> X\n", 2, "self-loop"),
    ("node A kind=unobserved\nnode B kind=unobserved\nedge A -> B\nedge B -> A\n", 4, "cycle"),
    ("frobnicate X\n", 1, "unknown"),
    ("node X kind=covariate\nedge X -> Q\n", 2, "Q"),
    ("node X kind=covariate\nprior X 1.5\n", 2, "probability"),
    ("node X kind=covariate\nnode Z kind=treatment_assigned\nedge X -> Z\nprior X 0.5\nmech Z parents=X table=0.5\n", 5, "entries"),
    ("node X kind=wizard\n", 1, "kind"),
]


@pytest.mark.parametrize("text,line,word", BAD, ids=[b[2] for b in BAD])
def test_parse_errors_carry_line(text, line, word):
    with pytest.raises(ParseError) as info:
        parse_model(text)
    assert info.value.line == line
    assert word.lower() in str(info.value).lower()


def test_comments_and_blank_lines_ignored():
    text = "# header\n\nnode X kind=covariate  # trailing\n"
    assert parse_model(text).graph.ids == ("X",)


def test_pinned_mnar_recovery_gap():
    mf = load_model(os.path.join(DATA, "dm_mnar_gap.model"))
    assert mf.graph == preset("DM")
    t = factual_joint(mf.model)
    rec = mar_recover_mean(ObservedTable.from_joint(t), "X,Z=1,S")
    arr = t.marginal(["Z", "X", "S", "Y"])[1]
    gap = np.abs(rec.values - arr[..., 1] / arr.sum(axis=-1)).max()
    assert gap > 1e-3
    assert gap == pytest.approx(0.13521610781534898, abs=1e-12)


# -- DOT ------------------------------------------------------------------------


def _parse_dot(text):
    graphs = pydot.graph_from_dot_data(text)
    assert graphs and len(graphs) == 1
    return graphs[0]


def _real_nodes(g):
    return [n for n in g.get_nodes() if n.get_name().strip('"') not in ("node", "edge", "graph")]


def test_empty_graph_is_valid_dot():
    text = export_dot(CausalGraph([], [], GraphKind.DAG))
    g = _parse_dot(text)
    assert g.get_type() == "digraph" and not _real_nodes(g)


def test_dm_dot_has_eleven_nodes_and_is_stable():
    text = export_dot(preset("DM"))
    assert text == export_dot(preset("DM"))
    assert len(_real_nodes(_parse_dot(text))) == 11


def test_dot_edge_styles():
    g = condition(to_principal_graph(preset("GeneralMain")), "X").graph
    dot = _parse_dot(export_dot(g))
    dashed = [e for e in dot.get_edges() if e.get_style() == "dashed"]
    assert len(dashed) == sum(e.kind is EdgeKind.DASHED for e in g.edges) > 0
    assert all(e.get("dir") == "none" for e in dashed)
    ps = _parse_dot(export_dot(to_principal_graph(preset("D"))))
    det = [e for e in ps.get_edges() if (e.get_label() or "").strip('"') == "="]
    assert len(det) == 2


def test_dot_marks_unobserved():
    dot = _parse_dot(export_dot(preset("D")))
    styles = {n.get_name().strip('"'): n.get_style() for n in dot.get_nodes()}
    assert "dashed" in (styles["U"] or "")
    assert "dashed" not in (styles["X"] or "")


# -- CLI ------------------------------------------------------------------------


@pytest.mark.parametrize("name", list(CASES))
def test_golden_reports(name, in_tests):
    code, text = run_command(CASES[name])
    assert code == 0, text
    with open(os.path.join(GOLDEN, name + ".json"), encoding="utf-8") as fh:
        want = json.load(fh)
    got = json.loads(text)
    assert got["schema_version"] == 1
    json_close(got, want, tol=1e-12)


def test_classify_dm_a_text(in_tests):
    code, text = run_command(["classify", "preset:DM-a", "--setting", "one-sided"])
    assert code == 0
    assert "mar0: true" in text and "lmar0: false" in text


def test_estimate_matches_oracle(in_tests):
    _, a = run_command(["estimate", "data/er.model", "--approach", "iv", "--json"])
    _, b = run_command(["oracle", "data/er.model", "--json"])
    ea, eb = json.loads(a)["report"]["effects"], json.loads(b)["report"]["effects"]
    assert ea["cace"] == pytest.approx(eb["cace"], abs=1e-9)


def test_simulate_reproducible_bytes(tmp_path, in_tests):
    paths = [tmp_path / "a.csv", tmp_path / "b.csv"]
    for p in paths:
        code, _ = run_command(["simulate", "data/er.model", "--n", "300", "--seed", "7", "--out", str(p)])
        assert code == 0
    a, b = (p.read_bytes() for p in paths)
    assert a == b
    assert a.startswith(b"X,Z,S,Y,R\n") and b"\r" not in a
    code, text = run_command(["simulate", "data/er.model", "--n", "300", "--seed", "7"])
    assert (text + "\n").encode() == a
    _, rep = run_command(["simulate", "data/er.model", "--n", "300", "--seed", "7", "--json", "--out", os.devnull])
    assert json.loads(rep)["report"]["sha256"] == hashlib.sha256(a).hexdigest()


def test_estimate_from_simulated_data(tmp_path, in_tests):
    out = tmp_path / "s.csv"
    run_command(["simulate", "data/er.model", "--n", "5000", "--seed", "1", "--out", str(out)])
    code, text = run_command(["estimate", "data/er.model", "--approach", "iv", "--data", str(out), "--json"])
    assert code == 0, text
    assert json.loads(text)["report"]["source"] == "data"


def test_exit_codes(tmp_path, in_tests):
    assert run_command(["classify", "preset:DM", "--bogus"])[0] == 2
    assert run_command(["classify", "no/such.model"])[0] == 2
    assert run_command(["classify", "preset:Nope"])[0] == 2
    assert run_command(["frobnicate"])[0] == 2
    bad = tmp_path / "bad.model"
    bad.write_text("node X kind=covariate\nedge X -> X\n")
    code, text = run_command(["classify", str(bad), "--json"])
    assert code == 2 and json.loads(text)["error"]["kind"] == "input"
    # no compliers: the IV denominator vanishes
    g, m = load_model("data/er.model")
    flat = m.replace(S=np.full(len(m.mechanisms["S"].table), 0.5))
    noc = tmp_path / "noc.model"
    noc.write_text(serialize_model(g, flat, setting=Setting.TWO_SIDED))
    code, text = run_command(["estimate", str(noc), "--approach", "iv", "--json"])
    assert code == 3 and json.loads(text)["error"]["kind"] == "identification"


def test_main_streams(capsys, in_tests):
    assert main(["classify", "preset:DM-b"]) == 0
    out = capsys.readouterr()
    assert "overall_label" in out.out and not out.err
    assert main(["classify", "preset:Nope"]) == 2
    assert "error" in capsys.readouterr().err


def test_randomize_and_param_seed(in_tests):
    code, text = run_command(["classify", "preset:DM", "--randomize", "12", "--json"])
    assert code == 0
    _, a = run_command(["oracle", "preset:DM", "--param-seed", "3", "--json"])
    _, b = run_command(["oracle", "preset:DM", "--param-seed", "3", "--json"])
    assert a == b
    want = true_pce(random_model(preset("DM"), 3)).cace
    assert json.loads(a)["report"]["effects"]["cace"] == pytest.approx(want, abs=1e-12)


def test_export_dot_command(in_tests):
    for graph in ("dag", "ps"):
        code, text = run_command(["export-dot", "preset:DM", "--graph", graph])
        assert code == 0 and _parse_dot(text)
    code, text = run_command(["export-dot", "preset:GeneralMain", "--graph", "conditional", "--on", "X"])
    assert code == 0 and "dashed" in text
    assert run_command(["export-dot", "preset:DM", "--graph", "conditional"])[0] == 2


def test_text_transform_is_dsl(in_tests):
    code, text = run_command(["transform", "preset:DM-b"])
    assert code == 0
    assert parse_model(text).graph == to_principal_graph(preset("DM-b"))
