import pytest
from hypothesis import given, strategies as st

from psmissing.graph import Edge, Node, NodeRole
from psmissing.library import preset, randomize_submodel
from psmissing.missingness import (
    StructureReport,
    check_box,
    classify_missingness,
    control_arm_aux,
    detect_structures,
    mnar_severity,
)
from psmissing.strata import Setting

ONE, TWO = Setting.ONE_SIDED, Setting.TWO_SIDED

# (preset, setting) -> expected flags for the conditional-graph table
VERDICTS = {
    ("DM", ONE): {"mar1": False, "mar0": False},
    ("DM-a", ONE): {"mar1": False, "mar0": True, "lmar0": False},
    ("DM-b", ONE): {"mar1": True, "mar0": True, "lmar0": True},
    ("DM-c", ONE): {"mar1": True, "mar0": True, "lmar0": True},
    ("DM", TWO): {"mar_z1": False, "mar_z0": False},
    ("DM-a", TWO): {"mar_z1": False, "mar_z0": False},
    ("DM-b", TWO): {"mar_z1": True, "mar_z0": True, "lmar_z1": True, "lmar_z0": True},
    ("DM-c", TWO): {"mar_z1": True, "mar_z0": True, "lmar_z1": True, "lmar_z0": True},
}


@pytest.mark.parametrize("key", list(VERDICTS), ids=lambda k: f"{k[0]}-{k[1].value}")
def test_verdict_table(key):
    v = classify_missingness(preset(key[0]), key[1])
    for flag, want in VERDICTS[key].items():
        assert v.flags[flag] is want, flag


def test_flag_names_and_labels():
    one = classify_missingness(preset("DM-a"), ONE)
    assert set(one.flags) == {"mar1", "mar0", "lmar0"}
    assert one.mar0 and not one.lmar0
    assert one.arm_label(0) == "MAR-not-LMAR"
    assert one.overall_label == "MNAR"
    two = classify_missingness(preset("DM-b"), TWO)
    assert set(two.flags) == {"mar_z1", "mar_z0", "lmar_z1", "lmar_z0"}
    assert two.overall_label == "LMAR-and-MAR"
    assert classify_missingness(preset("DM-b"), TWO, lmar=False).overall_label == "MAR"


def test_verdict_report_paths():
    v = classify_missingness(preset("DM-a"), ONE).to_dict()
    assert v["arms"]["1"]["mar_paths"] == ["R <- U_RS -> C_eq_S <- U_YS -> Y"]
    assert v["arms"]["0"]["mar_paths"] == []


def test_two_sided_symmetric_in_arms():
    for p in ("DM", "DM-a", "DM-b", "DM-c"):
        v = classify_missingness(preset(p), TWO)
        assert v.mar_z1 == v.mar_z0 and v.lmar_z1 == v.lmar_z0


@given(st.integers(0, 10**6), st.sampled_from(["DM", "GeneralMain"]), st.sampled_from(list(Setting)))
def test_relabel_invariance(seed, base, setting):
    g = randomize_submodel(base, seed)
    us = [n.id for n in g.nodes if n.role is NodeRole.UNOBSERVED]
    mapping = {u: f"H{i}" for i, u in enumerate(reversed(us))}
    a = classify_missingness(g, setting)
    b = classify_missingness(g.relabel(mapping), setting)
    assert a.flags == b.flags


@given(st.integers(0, 10**6), st.sampled_from(["DM", "GeneralMain"]), st.sampled_from(list(Setting)))
def test_lmar_implies_mar(seed, base, setting):
    v = classify_missingness(randomize_submodel(base, seed), setting)
    for arm in v.arms.values():
        assert not (arm.lmar and not arm.mar)


# -- structures ----------------------------------------------------------------


def test_dm_a_s_butterfly():
    r = detect_structures(preset("DM-a"))
    assert r.s_butterfly and ("U_RS", "U_YS") in r.s_witnesses
    assert not r.has_direct_path and not r.triangles


def test_dm_b_c_no_s_butterfly():
    for p in ("DM-b", "DM-c"):
        assert not detect_structures(preset(p)).s_butterfly


def test_general_main_x_butterfly():
    r = detect_structures(preset("GeneralMain"))
    assert r.x_butterfly and ("U_RX", "U_XY") in r.x_witnesses


def test_d_all_clear():
    r = detect_structures(preset("D"))
    assert not (r.has_direct_path or r.triangles or r.x_butterfly or r.s_butterfly)
    assert not r.downstream_nonignorable
    assert mnar_severity(r) == []


def test_dm_structures():
    r = detect_structures(preset("DM"))
    assert r.has_direct_path
    assert set(r.triangles) == {"U_RY", "U_RYS"}


def test_downstream_presets():
    assert detect_structures(preset("DownstreamNonIgnorable")).downstream_nonignorable == ("U_D",)
    assert detect_structures(preset("DownstreamIgnorable")).downstream_nonignorable == ()
    assert check_box(preset("DownstreamIgnorable"), 1).passed
    bad = check_box(preset("DownstreamNonIgnorable"), 1)
    assert "ii" in bad.failed


def test_severity_order():
    r = detect_structures(preset("DM"))
    kinds = [f.kind for f in mnar_severity(r)]
    assert kinds[:2] == ["direct", "triangle"]
    full = StructureReport(True, (("Y", "R"),), ("U1",), True, (("a", "b"),), True, (("c", "d"),), {"W": (("e", "f"),)}, ())
    assert [f.kind for f in mnar_severity(full)] == ["direct", "triangle", "x-butterfly", "s-butterfly", "w-butterfly:W"]
    only = StructureReport(False, (), (), False, (), True, (("c", "d"),), {}, ())
    assert [f.kind for f in mnar_severity(only)] == ["s-butterfly"]
    assert all(f.rationale for f in mnar_severity(full))


# -- boxes ---------------------------------------------------------------------


def test_box1_dm_b_passes():
    assert check_box(preset("DM-b"), 1).passed


def test_box1_dm_a_fails_iv():
    r = check_box(preset("DM-a"), 1, (), TWO, 1)
    assert r.failed == ("iv",)
    assert ("U_RS", "U_YS") in [tuple(w) for w in r.witnesses["iv"]]


def test_box1_control_arm_iv_automatic_one_sided():
    r = check_box(preset("DM-a"), 1, (), ONE, 0)
    assert r.flags["iv"]


def test_canonical_w():
    g = preset("CanonicalW")
    assert check_box(g, 2, ("W",)).passed
    assert not check_box(g, 2, ()).passed
    assert "ii" in check_box(g, 1).failed


def test_instrumental_w():
    g = preset("InstrumentalW")
    assert check_box(g, 3, ("W",)).passed
    assert not check_box(g, 2, ("W",)).passed


def test_box_errors():
    with pytest.raises(ValueError):
        check_box(preset("DM"), 4)
    with pytest.raises(ValueError):
        check_box(preset("CanonicalW"), 2, ("U_RY",))
    with pytest.raises(ValueError):
        check_box(preset("CanonicalW"), 1, ("W",))


def test_box_report_dict():
    d = check_box(preset("CanonicalW"), 2, ("W",)).to_dict()
    assert d["passed"] and d["w_set"] == ["W"] and set(d["flags"]) == {"i", "ii", "iii", "iv", "v"}


@given(st.integers(0, 10**6), st.sampled_from(list(Setting)))
def test_box1_iff_mar_on_dm_family(seed, setting):
    g = randomize_submodel("DM", seed)
    v = classify_missingness(g, setting)
    for z, arm in v.arms.items():
        assert check_box(g, 1, (), setting, z).passed == arm.mar


def test_control_arm_aux_subset():
    g = preset("CanonicalW")
    wp = control_arm_aux(g, ("W",))
    assert set(wp) <= {"W"}


def test_control_arm_aux_drops_s_butterfly_breaker():
    # W sits on the R-wing of the S-butterfly in DM-a: U_RS -> W -> R
    g = preset("DM-a").replace(
        add_nodes=[Node("W", NodeRole.AUXILIARY_W)],
        add_edges=[Edge.causal("U_RS", "W"), Edge.causal("W", "R")],
        remove_edges=[Edge.causal("U_RS", "R")],
    )
    assert not check_box(g, 3, (), ONE, 1).flags["iv"]
    assert check_box(g, 3, ("W",), ONE, 1).passed
    assert control_arm_aux(g, ("W",)) == ()
    assert classify_missingness(g, ONE, ("W",)).mar1
