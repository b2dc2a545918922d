import io

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, strategies as st

from _helpers import brute_factual_joint, brute_potential_joint
from psmissing.exceptions import ModelError
from psmissing.graph import CausalGraph, Edge, GraphKind, Node, NodeRole
from psmissing.library import PresetId, preset
from psmissing.oracle import (
    JointTable,
    StructuralModel,
    check_assumptions,
    cond_indep,
    cf,
    factual_joint,
    intervene,
    potential_joint,
    random_model,
    random_models,
    sample,
    true_pce,
    true_pce_batch,
    write_csv,
)
from psmissing.strata import Setting, Stratum

ONE, TWO = Setting.ONE_SIDED, Setting.TWO_SIDED


def coins(*ps):
    nodes = [Node(f"A{i}", NodeRole.UNOBSERVED, f"A{i}") for i in range(len(ps))]
    g = CausalGraph(nodes, [], GraphKind.DAG)
    return StructuralModel(g, {n.id: ((), [p]) for n, p in zip(nodes, ps)})


def copy_model():
    g = CausalGraph([Node("A", NodeRole.UNOBSERVED, "A"), Node("B", NodeRole.UNOBSERVED, "B")], [Edge.causal("A", "B")])
    return StructuralModel(g, {"A": ((), [0.5]), "B": (("A",), [0.0, 1.0])})


def confounded():
    return preset("D").replace(
        add_nodes=[Node("U_ZY", NodeRole.UNOBSERVED, "U_ZY")],
        add_edges=[Edge.causal("U_ZY", "Z"), Edge.causal("U_ZY", "Y")],
    )


# -- models ---------------------------------------------------------------------


def test_mechanism_validation():
    g = preset("D")
    m = random_model(g, 0)
    with pytest.raises(ModelError):
        m.replace(Y=np.full(len(m.mechanisms["Y"].table) + 1, 0.5))
    with pytest.raises(ModelError):
        m.replace(X=[1.2])
    mechs = dict(m.mechanisms)
    del mechs["R"]
    with pytest.raises(ModelError):
        StructuralModel(g, mechs)
    with pytest.raises(ModelError):
        StructuralModel(g, m.mechanisms, ONE)  # P(S=1 | Z=0) > 0


def test_random_models_respect_setting():
    g = preset("DM")
    one = random_models(g, 5, 0, ONE)
    two = random_models(g, 5, 0, TWO)
    for m in one:
        assert check_assumptions(m)["A3"]
        assert true_pce(m).prevalences.keys() == {"complier", "never-taker"}
    for m in two:
        assert check_assumptions(m)["A3"]


# -- joints ---------------------------------------------------------------------


def test_fair_coin_and_product():
    assert np.allclose(factual_joint(coins(0.5)).p, [0.5, 0.5])
    t = factual_joint(coins(0.3, 0.6))
    assert np.allclose(t.p, np.outer([0.7, 0.3], [0.4, 0.6]))


@given(st.integers(0, 10**6), st.sampled_from(["D", "ER", "PI-1", "DownstreamNonIgnorable"]), st.sampled_from(list(Setting)))
def test_factual_joint_matches_enumeration(seed, p, setting):
    m = random_model(preset(p), seed, setting)
    ids, brute = brute_factual_joint(m)
    assert np.allclose(factual_joint(m).marginal(ids), brute, atol=1e-14, rtol=0)


@given(st.integers(0, 10**6), st.sampled_from(["D", "ER", "PI-2", "DownstreamNonIgnorable"]), st.sampled_from(list(Setting)))
def test_potential_joint_matches_enumeration(seed, p, setting):
    m = random_model(preset(p), seed, setting)
    names, brute = brute_potential_joint(m)
    t = potential_joint(m)
    assert set(t.vars) == set(names)
    assert np.allclose(t.marginal(names), brute, atol=1e-14, rtol=0)


def test_min_coupling_arithmetic():
    g = CausalGraph([Node("Z", NodeRole.TREATMENT_ASSIGNED), Node("S", NodeRole.TREATMENT_RECEIVED)], [Edge.causal("Z", "S")])
    m = StructuralModel(g, {"Z": ((), [0.5]), "S": (("Z",), [0.3, 0.7])})
    arr = potential_joint(m).marginal([cf("S", 1), cf("S", 0)])
    assert np.allclose(arr, [[0.3, 0.0], [0.4, 0.3]])
    c = potential_joint(m).marginal(["C"])
    assert c[Stratum.DEFIER.code] == 0 and np.isclose(c[Stratum.COMPLIER.code], 0.4)


def test_no_path_from_z_gives_equal_potentials():
    g = preset("D").replace(remove_edges=[Edge.causal("Z", "S")])
    m = random_model(g, 3)
    t = potential_joint(m)
    assert t.prob(**{"C": {Stratum.NEVER.code, Stratum.ALWAYS.code}}) == pytest.approx(1, abs=1e-14)


def test_consistency_by_construction():
    m = random_model(preset("DM"), 4)
    t = potential_joint(m)
    for v in ("S", "Y"):
        for z in (0, 1):
            bad = t.prob(**{"Z": z, v: 0, cf(v, z): 1}) + t.prob(**{"Z": z, v: 1, cf(v, z): 0})
            assert bad == 0


def test_er_marginal_effect_matches_intervened_joints():
    for seed in range(10):
        m = random_model(preset("ER"), seed)
        t = potential_joint(m)
        ate = t.prob(**{cf("Y", 1): 1}) - t.prob(**{cf("Y", 0): 1})
        ey1 = factual_joint(intervene(m, "Z", 1)).prob(Y=1)
        ey0 = factual_joint(intervene(m, "Z", 0)).prob(Y=1)
        assert ate == pytest.approx(ey1 - ey0, abs=1e-14)


# -- conditional independence ---------------------------------------------------


def test_cond_indep_basics():
    ok, dep = cond_indep(factual_joint(coins(0.5, 0.3)), "A0", "A1")
    assert ok and dep == 0
    ok, dep = cond_indep(factual_joint(copy_model()), "A", "B")
    assert not ok and dep == pytest.approx(0.25)
    with pytest.raises(ValueError):
        cond_indep(factual_joint(copy_model()), "A", "A")


def test_cond_indep_skips_degenerate_cells():
    t = JointTable(["A", "B", "G"], np.array([[[0.25, 0.0], [0.25, 0.0]], [[0.25, 0.0], [0.25, 0.0]]]))
    assert cond_indep(t, "A", "B", "G") == (True, 0.0)


def test_dm_a_control_arm_mar_but_not_lmar():
    for seed in range(5):
        m = random_model(preset("DM-a"), seed, ONE)
        t = potential_joint(m, ["X", "Z", "R", "Y", "C"])
        ok, _ = cond_indep(t, "R", "Y", ["X"], where={"Z": 0})
        assert ok
        ok, dep = cond_indep(t, "R", "Y", ["X", "C"], where={"Z": 0})
        assert not ok and dep > 1e-4


# -- ground truth ---------------------------------------------------------------


def test_null_outcome_gives_zero_effects():
    g = preset("D").replace(remove_edges=[Edge.causal("S", "Y"), Edge.causal("Z", "Y")])
    m = random_model(g, 1)
    e = true_pce(m)
    assert e.cace == pytest.approx(0, abs=1e-15) and e.nace == pytest.approx(0, abs=1e-15)
    assert e.aace == pytest.approx(0, abs=1e-15)


def test_everyone_complies_one_sided():
    m = random_model(preset("D"), 2, ONE)
    parents = m.mechanisms["S"].parents
    table = np.array([1.0 if dict(zip(parents, cfg))["Z"] else 0.0 for cfg in np.ndindex(*(2,) * len(parents))])
    m = m.replace(S=table)
    e = true_pce(m)
    assert e.prevalences["complier"] == pytest.approx(1)
    t = potential_joint(m)
    ate = t.prob(**{cf("Y", 1): 1}) - t.prob(**{cf("Y", 0): 1})
    assert e.cace == pytest.approx(ate, abs=1e-14)
    assert np.isnan(e.nace)


def test_er_zero_aace_nace():
    mb = random_models(preset("ER"), 50, 7)
    _, eff = true_pce_batch(mb)
    assert np.abs(eff[:, Stratum.ALWAYS.code]).max() < 1e-12
    assert np.abs(eff[:, Stratum.NEVER.code]).max() < 1e-12


@given(st.integers(0, 10**6), st.sampled_from(["DM", "GeneralMain", "PI-1", "ER"]), st.sampled_from(list(Setting)))
def test_pce_coupling_invariance(seed, p, setting):
    mb = random_models(preset(p), 4, seed, setting)
    pa, ea = true_pce_batch(mb)
    pb, eb = true_pce_batch(mb, y_coupling="independent")
    assert np.allclose(pa, pb, atol=1e-14)
    assert np.allclose(np.nan_to_num(ea), np.nan_to_num(eb), atol=1e-13)


def test_prevalences_sum_to_one():
    for p in PresetId:
        for s in Setting:
            e = true_pce(random_model(preset(p), 0, s))
            assert sum(e.prevalences.values()) == pytest.approx(1, abs=1e-12)


# -- assumptions ----------------------------------------------------------------


def test_a1_holds_on_presets():
    for p in PresetId:
        for seed in range(3):
            assert check_assumptions(random_model(preset(p), seed))["A1"], p


def test_a3_fails_when_p1_below_p0():
    m = random_model(preset("D"), 0)
    parents = m.mechanisms["S"].parents
    table = np.array([0.2 if dict(zip(parents, cfg))["Z"] else 0.6 for cfg in np.ndindex(*(2,) * len(parents))])
    r = check_assumptions(m.replace(S=table))
    assert not r["A3"] and r.measures["A3"] == pytest.approx(0.4)


def test_er_passes_a4a_and_pi_passes_a4b():
    for seed in range(5):
        assert check_assumptions(random_model(preset("ER"), seed))["A4a"]
        assert not check_assumptions(random_model(preset("D"), seed))["A4a"]
        for p in ("PI-1", "PI-2"):
            assert check_assumptions(random_model(preset(p), seed))["A4b"]


def test_confounded_model_fails_a1():
    worst = max(check_assumptions(random_model(confounded(), s)).measures["A1"] for s in range(20))
    assert worst > 1e-3


def test_assumption_report_dict():
    d = check_assumptions(random_model(preset("D"), 0)).to_dict()
    assert set(d["flags"]) == {"A1", "A3", "A4a", "A4b"} and d["tol"] == 1e-9


# -- sampling -------------------------------------------------------------------


def test_sample_rejects_bad_n():
    m = random_model(preset("D"), 0)
    for n in (0, -1, 2.5):
        with pytest.raises(ValueError):
            sample(m, n)


def test_sample_seeded_bytes():
    m = random_model(preset("DM"), 0)
    a = write_csv(sample(m, 500, seed=7))
    b = write_csv(sample(m, 500, seed=7))
    assert a == b and a != write_csv(sample(m, 500, seed=8))
    assert a.splitlines()[0] == "X,Z,S,Y,R"
    assert "\r" not in a


def test_sample_columns_and_masking():
    df = sample(random_model(preset("CanonicalW"), 1), 2000, seed=1)
    assert list(df.columns) == ["X", "W", "Z", "S", "Y", "R"]
    assert (df["Y"].isna() == (df["R"] == 0)).all()
    back = pd.read_csv(io.StringIO(write_csv(df)), dtype="Int64")
    assert back.equals(df.astype("Int64"))


def test_sample_frequencies_within_four_se():
    m = random_model(preset("DM"), 11)
    n = 10**6
    df = sample(m, n, seed=3)
    t = factual_joint(m)
    for v in ("X", "Z", "S", "R"):
        p = t.prob(**{v: 1})
        se = np.sqrt(p * (1 - p) / n)
        assert abs((df[v] == 1).mean() - p) < 4 * se, v
    p = t.prob(R=1, Y=1)
    se = np.sqrt(p * (1 - p) / n)
    assert abs(((df["R"] == 1) & (df["Y"] == 1)).mean() - p) < 4 * se
