import warnings
from itertools import combinations

import pytest
from hypothesis import given, strategies as st

from psmissing.conditioning import (
    MERGED_ID,
    ColliderFanWarning,
    ConditioningSpec,
    collider_fan,
    condition,
)
from psmissing.exceptions import ConditioningError, GraphError
from psmissing.graph import CausalGraph, Edge, EdgeKind, GraphKind, Node, NodeRole, m_separated
from psmissing.library import preset, randomize_submodel
from psmissing.principal import to_principal_graph
from psmissing.strata import Setting


def ps(p):
    return to_principal_graph(preset(p))


def test_spec_parsing():
    spec = ConditioningSpec.parse("X, Z=1,S=0")
    assert spec.items == (("X", None), ("Z", 1), ("S", 0))
    assert str(spec) == "X,Z=1,S=0"
    assert ConditioningSpec.parse([("X", None), "Z=0"]).nodes == ("X", "Z")
    with pytest.raises(ValueError):
        ConditioningSpec.parse("X,X")
    with pytest.raises(ValueError):
        ConditioningSpec.parse("Z=2")


def test_condition_on_x_drops_u_rx():
    cg = condition(ps("DM"), "X")
    assert "U_RX" not in cg.graph and "X" not in cg.graph
    assert cg.graph.kind is GraphKind.CONDITIONAL


def test_one_sided_treated_arm_merges_c_and_s():
    cg = condition(ps("DM"), "X,Z=1", Setting.ONE_SIDED)
    assert MERGED_ID in cg.graph
    assert cg.graph.node(MERGED_ID).tag == "C=S"
    assert cg.resolve("C") == cg.resolve("S") == MERGED_ID
    assert "C" in cg and "S" in cg


def test_one_sided_control_arm_drops_s():
    cg = condition(ps("DM"), "X,Z=0", Setting.ONE_SIDED)
    assert "S" not in cg.graph and "C" in cg.graph
    assert "constant" in cg.reasons["S"]


def test_two_sided_keeps_c_and_s():
    cg = condition(ps("DM"), "X,Z=1", Setting.TWO_SIDED)
    assert "C" in cg.graph.ids and "S" in cg.graph.ids


def test_general_main_x_butterfly_dashed_edge():
    cg = condition(ps("GeneralMain"), "X")
    g = cg.graph
    assert g.has_edge(EdgeKind.DASHED, "U_RX", "U_XY")
    assert all(e.kind is not EdgeKind.DASHED or set(e.endpoints) <= set(preset("GeneralMain").parents("X")) for e in g.edges)


def test_order_and_value_errors():
    with pytest.raises(ConditioningError):
        condition(ps("DM"), "Z,X")
    with pytest.raises(ConditioningError):
        condition(ps("DM"), "X,Z=0,S=1", Setting.ONE_SIDED)
    with pytest.raises(GraphError):
        condition(ps("DM"), "Q")
    with pytest.raises(ConditioningError):
        condition(ps("DM"), "U_RX")


def test_staged_conditioning_matches_joint():
    for p in ("DM", "GeneralMain", "DM-a", "CanonicalW"):
        for setting in Setting:
            g = ps(p)
            joint = condition(g, "X,Z=1", setting)
            staged = condition(condition(g, "X", setting), "Z=1", setting)
            assert staged.graph == joint.graph
            assert staged.merged == joint.merged


def test_collider_fan():
    assert collider_fan(preset("DM"), "S") == {"U_RS", "U_RX", "U_RYS", "U_RZ", "U_YS", "X", "Z"}
    assert collider_fan(preset("DM"), "U_RX") == set()
    chain = CausalGraph(
        [Node(v, NodeRole.UNOBSERVED, v) for v in "ABS"], [Edge.causal("A", "B"), Edge.causal("B", "S")]
    )
    assert collider_fan(chain, "S") == {"A", "B"}
    with pytest.raises(GraphError):
        collider_fan(chain, "Q")


def test_conditioned_nodes_absent_and_dashed_only_between_coparents():
    g = ps("DM")
    cg = condition(g, "X,Z")
    for v in ("X", "Z"):
        assert v not in cg.graph
    coparents = set()
    for v in ("X", "Z"):
        coparents |= set(g.parents(v))
    for e in cg.graph.edges:
        if e.kind is EdgeKind.DASHED:
            assert set(e.endpoints) <= coparents


def _coherent(g, K):
    cg = condition(g, K)
    for p, q in combinations([v for v in cg.graph.ids if v not in cg.merged], 2):
        if m_separated(cg.graph, p, q) != m_separated(g, p, q, list(K)):
            return False
    return True


@given(st.integers(0, 10**6), st.sampled_from(["DM", "GeneralMain"]), st.sampled_from([("X",), ("X", "Z")]))
def test_separation_coherence_upstream_first(seed, base, K):
    g = to_principal_graph(randomize_submodel(base, seed))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ColliderFanWarning)
        assert _coherent(g, K)


@given(st.integers(0, 10**6), st.sampled_from(["DM", "GeneralMain"]), st.sampled_from([("Z",), ("X", "Z", "S")]))
def test_incoherence_is_always_flagged(seed, base, K):
    g = to_principal_graph(randomize_submodel(base, seed))
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        ok = _coherent(g, K)
    if not ok:
        assert any(issubclass(w.category, ColliderFanWarning) for w in caught)
