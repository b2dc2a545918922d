"""Exact discrete structural causal models.

Every variable is binary. A mechanism gives ``P(node=1 | parents)`` for each
parent configuration in binary-counting order, first parent as the most
significant bit. Root nodes have an empty parent tuple and a single entry.

Cross-world (potential-outcome) tables couple the two arms of each node
downstream of Z through a shared uniform variate: with arm probabilities
``p1`` and ``p0`` the joint is ``P(1,1) = min(p1, p0)``. The stratum
variable ``C`` is the pair ``(S(1), S(0))`` coded as ``2*S(1) + S(0)``:
0 never-taker, 1 defier, 2 complier, 3 always-taker.

Most routines have a ``*_batch`` form that evaluates many parameterizations
of one graph at once; results are arrays with a leading batch axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping

import numpy as np
import pandas as pd

from ._tensor import contract
from .exceptions import GraphError, ModelError
from .graph import CausalGraph, GraphKind, NodeRole, validate_graph
from .strata import EffectEstimates, Setting, Stratum, strata_for

__all__ = [
    "Mechanism",
    "StructuralModel",
    "ModelBatch",
    "random_model",
    "random_models",
    "JointTable",
    "factual_joint",
    "factual_joint_batch",
    "potential_joint",
    "potential_joint_batch",
    "cond_indep",
    "true_pce",
    "true_pce_batch",
    "AssumptionReport",
    "check_assumptions",
    "sample",
    "write_csv",
    "intervene",
    "cf",
    "STRATUM",
]

STRATUM = "C"
_DEGENERATE = 1e-12


def cf(v: str, z: int) -> str:
    """Name of the potential value of ``v`` under ``Z=z``."""
    return f"{v}({z})"


# -- models ----------------------------------------------------------------


@dataclass(frozen=True)
class Mechanism:
    parents: tuple
    table: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        t = np.asarray(self.table, dtype=float).reshape(-1)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    def prob(self, config: Mapping[str, int]) -> float:
        idx = 0
        for p in self.parents:
            idx = 2 * idx + int(config[p])
        return float(self.table[idx])


def _check_tables(graph: CausalGraph, tables: Mapping, setting: Setting, batched: bool):
    if graph.kind is not GraphKind.DAG:
        raise ModelError("structural models need a dag")
    problems = validate_graph(graph)
    if problems:
        raise ModelError("invalid graph: " + "; ".join(problems))
    for v in graph.ids:
        if v not in tables:
            raise ModelError(f"no mechanism for node {v}")
    for v, (parents, table) in tables.items():
        if v not in graph:
            raise ModelError(f"mechanism for unknown node {v}")
        if len(set(parents)) != len(parents) or set(parents) != set(graph.parents(v)):
            raise ModelError(
                f"mechanism parents of {v} ({', '.join(parents) or 'none'}) do not match "
                f"the graph ({', '.join(graph.parents(v)) or 'none'})"
            )
        want = 2 ** len(parents)
        if table.shape[-1] != want:
            raise ModelError(f"mechanism table of {v} has {table.shape[-1]} entries, expected {want}")
        if not np.all(np.isfinite(table)) or table.min(initial=0.0) < 0 or table.max(initial=0.0) > 1:
            raise ModelError(f"mechanism table of {v} has probabilities outside [0, 1]")
    if setting is Setting.ONE_SIDED:
        s = graph.role_node(NodeRole.TREATMENT_RECEIVED)
        z = graph.role_node(NodeRole.TREATMENT_ASSIGNED)
        if s is not None and z is not None:
            parents, table = tables[s]
            if z not in parents:
                raise ModelError("one-sided noncompliance needs Z as a parent of S")
            t = table.reshape(table.shape[:-1] + (2,) * len(parents))
            pos = parents.index(z) + (1 if batched else 0)
            ctrl = np.take(t, 0, axis=pos)
            if np.any(ctrl != 0):
                raise ModelError("one-sided noncompliance requires P(S=1 | Z=0, ...) = 0")


class StructuralModel:
    """A DAG with a mechanism per node.

    Parameters
    ----------
    graph : CausalGraph
        Kind ``dag``.
    mechanisms : dict
        Node id -> :class:`Mechanism` (or ``(parents, table)``).
    setting : Setting
    """

    def __init__(self, graph: CausalGraph, mechanisms: Mapping, setting=Setting.TWO_SIDED):
        self.graph = graph
        self.setting = Setting.coerce(setting)
        mechs = {}
        for v, m in mechanisms.items():
            if not isinstance(m, Mechanism):
                m = Mechanism(*m)
            mechs[v] = m
        _check_tables(graph, {v: (m.parents, m.table) for v, m in mechs.items()}, self.setting, False)
        self.mechanisms = {v: mechs[v] for v in graph.ids}

    def __repr__(self):
        return f"StructuralModel({self.graph!r}, setting={self.setting.value})"

    def as_batch(self) -> "ModelBatch":
        return ModelBatch(
            self.graph,
            {v: (m.parents, m.table[None, :]) for v, m in self.mechanisms.items()},
            self.setting,
        )

    def replace(self, **tables) -> "StructuralModel":
        """Copy with some mechanism tables replaced (same parent order)."""
        mechs = dict(self.mechanisms)
        for v, t in tables.items():
            mechs[v] = Mechanism(mechs[v].parents, t)
        return StructuralModel(self.graph, mechs, self.setting)


class ModelBatch:
    """Many parameterizations of one graph; tables have shape ``(batch, 2**k)``."""

    def __init__(self, graph: CausalGraph, tables: Mapping, setting=Setting.TWO_SIDED):
        self.graph = graph
        self.setting = Setting.coerce(setting)
        tabs = {}
        size = None
        for v, (parents, t) in tables.items():
            t = np.asarray(t, dtype=float)
            if t.ndim != 2:
                raise ModelError("batched tables must be two-dimensional")
            size = t.shape[0] if size is None else size
            if t.shape[0] != size:
                raise ModelError("inconsistent batch sizes")
            tabs[v] = (tuple(parents), t)
        _check_tables(graph, tabs, self.setting, True)
        self.tables = {v: tabs[v] for v in graph.ids}
        self.size = size or 1

    def __len__(self):
        return self.size

    def __getitem__(self, i) -> StructuralModel:
        return StructuralModel(
            self.graph, {v: Mechanism(p, t[i]) for v, (p, t) in self.tables.items()}, self.setting
        )

    def __iter__(self):
        for i in range(self.size):
            yield self[i]


def _random_tables(graph: CausalGraph, setting: Setting, rng, n: int, low=0.1, high=0.9, monotone=True):
    s = graph.role_node(NodeRole.TREATMENT_RECEIVED)
    z = graph.role_node(NodeRole.TREATMENT_ASSIGNED)
    tables = {}
    for v in graph.ids:
        parents = graph.parents(v)
        t = rng.uniform(low, high, size=(n, 2 ** len(parents)))
        if v == s and z in parents:
            shaped = t.reshape((n,) + (2,) * len(parents))
            pos = parents.index(z) + 1
            if setting is Setting.ONE_SIDED:
                idx = [slice(None)] * shaped.ndim
                idx[pos] = 0
                shaped[tuple(idx)] = 0.0
            elif monotone:
                shaped = np.sort(shaped, axis=pos)
            t = shaped.reshape(n, -1)
        tables[v] = (parents, t)
    return tables


def random_models(graph: CausalGraph, n: int, seed=None, setting=Setting.TWO_SIDED, *, low=0.1, high=0.9, monotone=True) -> ModelBatch:
    """``n`` random parameterizations with entries uniform in ``[low, high]``.

    The S mechanism is made monotone in Z (``P(S=1|Z=1,.) >= P(S=1|Z=0,.)``)
    unless ``monotone=False``; in the one-sided setting ``P(S=1|Z=0,.)`` is 0.
    """
    setting = Setting.coerce(setting)
    rng = np.random.default_rng(seed)
    return ModelBatch(graph, _random_tables(graph, setting, rng, n, low, high, monotone), setting)


def random_model(graph: CausalGraph, seed=None, setting=Setting.TWO_SIDED, **kw) -> StructuralModel:
    return random_models(graph, 1, seed, setting, **kw)[0]


def intervene(m: StructuralModel, node: str, value: int) -> StructuralModel:
    """Model with ``node`` forced to ``value`` (its incoming arrows cut)."""
    g = m.graph
    g.check_ids([node])
    new_graph = g.replace(remove_edges=[e for e in g.edges if e.target == node])
    mechs = {}
    for v, mech in m.mechanisms.items():
        mechs[v] = Mechanism((), [float(value)]) if v == node else mech
    setting = m.setting
    if node == g.role_node(NodeRole.TREATMENT_ASSIGNED):
        setting = Setting.TWO_SIDED  # the constraint tying S to Z is no longer checkable
    return StructuralModel(new_graph, mechs, setting)


# -- tables ----------------------------------------------------------------


class JointTable:
    """Exact probability table over discrete variables.

    Parameters
    ----------
    vars : sequence of str
    p : ndarray
        Shape ``cards`` or, when ``batched``, ``(batch, *cards)``.
    aliases : dict, optional
        Virtual variable -> tuple of stored variables, combined in
        mixed-radix order (first component most significant). The stratum
        ``C`` is an alias of ``(S(1), S(0))``.
    meta : dict, optional
        Role lists (``x``, ``v``, ``w``, ``z``, ``s``, ``y``, ``r``) used as
        defaults by the estimators.
    """

    def __init__(self, vars, p, *, batched=False, aliases=None, meta=None, check=True):
        self.vars = tuple(vars)
        p = np.asarray(p, dtype=float)
        self.batched = bool(batched)
        if len(set(self.vars)) != len(self.vars):
            raise ValueError("duplicate variables")
        if p.ndim != len(self.vars) + int(self.batched):
            raise ValueError("table shape does not match variable list")
        self.p = p
        self.aliases = dict(aliases or {})
        self.meta = dict(meta or {})
        if check:
            if np.any(p < -1e-15):
                raise ValueError("negative probability")
            total = p.reshape(p.shape[0], -1).sum(axis=1) if self.batched else p.sum()
            if np.any(np.abs(total - 1.0) > 1e-9):
                raise ValueError("probabilities do not sum to 1")

    def __repr__(self):
        b = f", batch={self.p.shape[0]}" if self.batched else ""
        return f"JointTable(vars={self.vars}{b})"

    @property
    def size(self) -> int:
        return self.p.shape[0] if self.batched else 1

    def card(self, v: str) -> int:
        if v in self.aliases:
            return int(np.prod([self.card(c) for c in self.aliases[v]]))
        return self.p.shape[self.vars.index(v) + int(self.batched)]

    def __contains__(self, v):
        return v in self.vars or v in self.aliases

    def _check_vars(self, vs):
        for v in vs:
            if v not in self:
                raise KeyError(f"variable {v!r} not in table")

    def marginal(self, vs) -> np.ndarray:
        """Array over ``vs`` (aliases expanded and recombined)."""
        vs = list(vs)
        self._check_vars(vs)
        if len(set(vs)) != len(vs):
            raise ValueError("duplicate variables in marginal request")
        stored = []
        for v in vs:
            comps = self.aliases.get(v, (v,))
            for c in comps:
                if c in stored:
                    raise ValueError(f"variable {c!r} requested twice (through an alias)")
                stored.append(c)
        off = int(self.batched)
        keep = [self.vars.index(c) for c in stored]
        drop = tuple(i + off for i in range(len(self.vars)) if i not in keep)
        arr = self.p.sum(axis=drop) if drop else self.p
        remaining = [i for i in range(len(self.vars)) if i in keep]
        perm = [remaining.index(k) + off for k in keep]
        arr = np.transpose(arr, (list(range(off)) + perm))
        shape = list(arr.shape[:off]) + [self.card(v) for v in vs]
        return arr.reshape(shape)

    def sub(self, vs) -> "JointTable":
        vs = list(vs)
        arr = self.marginal(vs)
        return JointTable(vs, arr, batched=self.batched, meta=self.meta, check=False)

    def __getitem__(self, i) -> "JointTable":
        if not self.batched:
            raise TypeError("table is not batched")
        return JointTable(self.vars, self.p[i], aliases=self.aliases, meta=self.meta, check=False)

    def prob(self, **where) -> float | np.ndarray:
        """Probability of an event given as ``var=value`` or ``var={values}``."""
        vs = list(where)
        arr = self.marginal(vs)
        arr = _mask(arr, [where[v] for v in vs], int(self.batched))
        return arr.reshape(arr.shape[0], -1).sum(axis=1) if self.batched else float(arr.sum())

    def items(self):
        """(configuration dict, probability) pairs; unbatched tables only."""
        if self.batched:
            raise TypeError("items() needs an unbatched table")
        for cfg in product(*(range(n) for n in self.p.shape)):
            yield dict(zip(self.vars, cfg)), float(self.p[cfg])


def _mask(arr: np.ndarray, allowed, off: int) -> np.ndarray:
    """Zero out entries whose value on axis ``off+i`` is not in ``allowed[i]``."""
    out = arr
    for i, a in enumerate(allowed):
        if a is None:
            continue
        vals = {int(a)} if np.isscalar(a) else {int(x) for x in a}
        n = arr.shape[off + i]
        m = np.array([j in vals for j in range(n)], dtype=float)
        shape = [1] * arr.ndim
        shape[off + i] = n
        out = out * m.reshape(shape)
    return out


def cond_indep(t: JointTable, A, B, given=(), tol: float = 1e-9, where=None):
    """Test ``A ⊥ B | given`` exactly.

    The dependence measure is the largest absolute gap
    ``|P(a,b|g) - P(a|g) P(b|g)|`` over configurations ``g`` of ``given``
    with probability above 1e-12.

    Parameters
    ----------
    t : JointTable
    A, B, given : str or sequence of str
        Disjoint variable sets.
    tol : float
        Independence threshold on the measure.
    where : dict, optional
        Restrict to an event: ``{var: value}`` or ``{var: {values}}``. A
        restricted variable that is also in ``given`` limits which given
        configurations are inspected; otherwise it conditions on the event.

    Returns
    -------
    (bool, float) or (ndarray, ndarray) for batched tables.
    """
    A = [A] if isinstance(A, str) else list(A)
    B = [B] if isinstance(B, str) else list(B)
    given = [given] if isinstance(given, str) else list(given)
    where = dict(where or {})
    if not A or not B:
        raise ValueError("A and B must be non-empty")
    sets = [set(A), set(B), set(given)]
    if sets[0] & sets[1] or sets[0] & sets[2] or sets[1] & sets[2]:
        raise ValueError("A, B and given must be disjoint")
    if set(where) & (sets[0] | sets[1]):
        raise ValueError("where may not restrict A or B")
    wextra = [v for v in where if v not in given]
    vs = wextra + given + A + B
    arr = t.marginal(vs)
    off = int(t.batched)
    arr = _mask(arr, [where.get(v) for v in vs], off)
    if wextra:
        arr = arr.sum(axis=tuple(range(off, off + len(wextra))))
    ng = int(np.prod([t.card(v) for v in given])) if given else 1
    na = int(np.prod([t.card(v) for v in A]))
    nb = int(np.prod([t.card(v) for v in B]))
    lead = arr.shape[:off]
    arr = arr.reshape(lead + (ng, na, nb))
    total = arr.sum(axis=(-3, -2, -1), keepdims=True)
    pg = arr.sum(axis=(-2, -1), keepdims=True)
    ok = (pg > _DEGENERATE) & (total > _DEGENERATE)
    safe = np.where(ok, pg, 1.0)
    cond = arr / safe
    pa = cond.sum(axis=-1, keepdims=True)
    pb = cond.sum(axis=-2, keepdims=True)
    gap = np.abs(cond - pa * pb) * ok
    dep = gap.reshape(lead + (-1,)).max(axis=-1) if gap.size else np.zeros(lead)
    if t.batched:
        return dep <= tol, dep
    dep = float(dep)
    return dep <= tol, dep


# -- joints ----------------------------------------------------------------


def _node_factor(parents, table, pvars, value_var):
    """Factor ``P(value_var | pvars)`` from a flat batched table.

    ``pvars`` lists, per parent, either a variable name or a constant 0/1.
    Returns ``(vars, array)`` with repeated variables merged.
    """
    n = table.shape[0]
    t = table.reshape((n,) + (2,) * len(parents))
    t = _specialize(t, pvars)
    names = [v for v in pvars if isinstance(v, str)]
    t, names = _dedupe(t, names)
    f = np.stack([1.0 - t, t], axis=1)
    return [value_var] + names, f


def _specialize(t, pvars):
    """Index constant parents out of a ``(batch, 2, ..., 2)`` array."""
    idx = [slice(None)]
    for v in pvars:
        idx.append(slice(None) if isinstance(v, str) else int(v))
    return t[tuple(idx)]


def _dedupe(arr, names):
    """Take the diagonal over repeated axis names (batch axis first)."""
    names = list(names)
    while len(set(names)) != len(names):
        for i, v in enumerate(names):
            j = names.index(v, i + 1) if v in names[i + 1:] else None
            if j is not None:
                arr = np.diagonal(arr, axis1=i + 1, axis2=j + 1)
                arr = np.moveaxis(arr, -1, i + 1)
                del names[j]
                break
    return arr, names


def _align(arr, names, target):
    """Broadcast ``arr`` over ``names`` (batch first) to the axis list ``target``."""
    perm = [names.index(v) for v in target if v in names]
    arr = np.transpose(arr, [0] + [p + 1 for p in perm])
    shape = [arr.shape[0]]
    k = 1
    for v in target:
        if v in names:
            shape.append(arr.shape[k])
            k += 1
        else:
            shape.append(1)
    return arr.reshape(shape)


def _meta(graph: CausalGraph) -> dict:
    R = NodeRole
    one = lambda r: graph.role_node(r)  # noqa: E731
    return {
        "x": list(graph.nodes_with_role(R.COVARIATE_X)),
        "v": list(graph.nodes_with_role(R.COVARIATE_V)),
        "w": list(graph.nodes_with_role(R.AUXILIARY_W)),
        "z": one(R.TREATMENT_ASSIGNED),
        "s": one(R.TREATMENT_RECEIVED),
        "y": one(R.OUTCOME),
        "r": one(R.RESPONSE),
    }


def _factual_factors(mb: ModelBatch):
    factors = []
    for v in mb.graph.ids:
        parents, t = mb.tables[v]
        factors.append(_node_factor(parents, t, list(parents), v))
    return factors


def factual_joint_batch(mb: ModelBatch, keep=None) -> JointTable:
    """Exact joint over all nodes (or ``keep``) for every model in the batch."""
    keep = list(mb.graph.ids if keep is None else keep)
    mb.graph.check_ids(keep)
    arr = contract(_factual_factors(mb), keep)
    return JointTable(keep, arr, batched=True, meta=_meta(mb.graph), check=False)


def factual_joint(m: StructuralModel, keep=None) -> JointTable:
    """Exact joint over all nodes of ``m`` (or the subset ``keep``)."""
    return factual_joint_batch(m.as_batch(), keep)[0]


def counterfactual_nodes(graph: CausalGraph) -> list[str]:
    """Nodes that need one copy per arm: descendants of Z that lead to S or Y."""
    z = graph.role_node(NodeRole.TREATMENT_ASSIGNED)
    if z is None:
        raise GraphError("model has no treatment-assigned node")
    s, y = graph.role_node(NodeRole.TREATMENT_RECEIVED), graph.role_node(NodeRole.OUTCOME)
    targets = {v for v in (s, y) if v is not None}
    up = graph.ancestors(targets) | targets
    dz = graph.descendants(z)
    return [v for v in graph.topological_order() if v in dz and v in up] + [
        v for v in (s, y) if v is not None and v not in dz
    ]


def _pair_factor(parents, table, pv1, pv0, v1, v0, coupling):
    n = table.shape[0]
    t = table.reshape((n,) + (2,) * len(parents))
    p1 = _specialize(t, pv1)
    p0 = _specialize(t, pv0)
    n1 = [v for v in pv1 if isinstance(v, str)]
    n0 = [v for v in pv0 if isinstance(v, str)]
    p1, n1 = _dedupe(p1, n1)
    p0, n0 = _dedupe(p0, n0)
    union = list(dict.fromkeys(n1 + n0))
    a1 = _align(p1, n1, union)
    a0 = _align(p0, n0, union)
    a1, a0 = np.broadcast_arrays(a1, a0)
    both = np.minimum(a1, a0) if coupling == "comonotone" else a1 * a0
    f11 = both
    f10 = a1 - both
    f01 = a0 - both
    f00 = 1.0 - a1 - a0 + both
    f = np.stack([np.stack([f00, f01], axis=1), np.stack([f10, f11], axis=1)], axis=1)
    return [v1, v0] + union, f


def _potential_factors(mb: ModelBatch, y_coupling="comonotone"):
    g = mb.graph
    z = g.role_node(NodeRole.TREATMENT_ASSIGNED)
    y = g.role_node(NodeRole.OUTCOME)
    D = counterfactual_nodes(g)
    dset = set(D)
    factors = []
    for v in g.ids:
        parents, t = mb.tables[v]
        if v in dset:
            worlds = []
            for w in (1, 0):
                worlds.append([w if p == z else (cf(p, w) if p in dset else p) for p in parents])
            coupling = y_coupling if v == y else "comonotone"
            factors.append(_pair_factor(parents, t, worlds[0], worlds[1], cf(v, 1), cf(v, 0), coupling))
            # consistency: the factual value is the potential value under the realized Z
            ind = np.zeros((1, 2, 2, 2, 2))
            for zz, a1, a0 in product((0, 1), repeat=3):
                ind[0, a1 if zz else a0, zz, a1, a0] = 1.0
            factors.append(([v, z, cf(v, 1), cf(v, 0)], ind))
        else:
            factors.append(_node_factor(parents, t, list(parents), v))
    return factors, D


def potential_joint_batch(mb: ModelBatch, keep=None, *, y_coupling="comonotone") -> JointTable:
    """Joint of factual and cross-world potential values for a batch of models.

    The result holds every node plus ``v(1), v(0)`` for each node returned by
    :func:`counterfactual_nodes`; ``C`` is available as an alias. Pass
    ``keep`` (which may include ``C``) to sum out everything else early.
    ``y_coupling="independent"`` couples the two outcome copies
    independently instead of comonotonically.
    """
    if y_coupling not in ("comonotone", "independent"):
        raise ValueError("y_coupling must be 'comonotone' or 'independent'")
    g = mb.graph
    factors, D = _potential_factors(mb, y_coupling)
    s = g.role_node(NodeRole.TREATMENT_RECEIVED)
    allvars = list(g.ids) + [cf(v, w) for v in D for w in (1, 0)]
    if keep is None:
        keep = allvars
    stored = []
    for v in keep:
        if v == STRATUM:
            stored.extend([cf(s, 1), cf(s, 0)])
        elif v in allvars:
            stored.append(v)
        else:
            raise KeyError(f"variable {v!r} not in the potential-outcome table")
    aliases = {STRATUM: (cf(s, 1), cf(s, 0))} if s is not None and cf(s, 1) in stored else {}
    arr = contract(factors, stored)
    meta = _meta(g)
    meta["counterfactual"] = D
    return JointTable(stored, arr, batched=True, aliases=aliases, meta=meta, check=False)


def potential_joint(m: StructuralModel, keep=None, **kw) -> JointTable:
    return potential_joint_batch(m.as_batch(), keep, **kw)[0]


# -- ground truth ----------------------------------------------------------


def _effects_from(arr):
    """PCEs and prevalences from a ``(batch, C, Y(1), Y(0))`` array."""
    prev = arr.sum(axis=(2, 3))
    ey1 = arr[:, :, 1, :].sum(axis=2)
    ey0 = arr[:, :, :, 1].sum(axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        eff = np.where(prev > _DEGENERATE, (ey1 - ey0) / np.where(prev > 0, prev, 1), np.nan)
    return prev, eff


def true_pce_batch(mb: ModelBatch, *, y_coupling="comonotone"):
    """Arrays of stratum prevalences and effects, indexed by stratum code."""
    g = mb.graph
    y = g.role_node(NodeRole.OUTCOME)
    t = potential_joint_batch(mb, [STRATUM, cf(y, 1), cf(y, 0)], y_coupling=y_coupling)
    arr = t.marginal([STRATUM, cf(y, 1), cf(y, 0)])
    return _effects_from(arr)


def true_pce(m: StructuralModel, *, y_coupling="comonotone") -> EffectEstimates:
    """Principal causal effects ``E[Y(1) - Y(0) | C]`` and prevalences.

    Strata without mass get ``nan`` effects. Defier mass, if any, is
    reported under ``prevalences['defier']``.
    """
    prev, eff = true_pce_batch(m.as_batch(), y_coupling=y_coupling)
    prev, eff = prev[0], eff[0]
    g = m.graph
    x = g.nodes_with_role(NodeRole.COVARIATE_X) + g.nodes_with_role(NodeRole.COVARIATE_V)
    prevalences = {s.value: float(prev[s.code]) for s in strata_for(m.setting)}
    if m.setting is Setting.TWO_SIDED:
        prevalences[Stratum.DEFIER.value] = float(prev[Stratum.DEFIER.code])
    covdist = {}
    if x:
        t = potential_joint(m, [STRATUM, *x])
        arr = t.marginal([STRATUM, *x])
        for s in strata_for(m.setting):
            mass = arr[s.code].sum()
            if mass > _DEGENERATE:
                d = arr[s.code] / mass
                covdist[s.value] = {cfg: float(d[cfg]) for cfg in product((0, 1), repeat=len(x))}
    aace = float(eff[Stratum.ALWAYS.code]) if m.setting is Setting.TWO_SIDED else None
    return EffectEstimates(
        setting=m.setting,
        cace=float(eff[Stratum.COMPLIER.code]),
        nace=float(eff[Stratum.NEVER.code]),
        aace=aace,
        prevalences=prevalences,
        covariate_dist=covdist,
        extra={"covariates": list(x)},
    )


@dataclass(frozen=True)
class AssumptionReport:
    """Numeric identification-assumption checks.

    Each entry of ``flags`` is True when the assumption holds within ``tol``;
    ``measures`` holds the corresponding dependence measure (for A3, the
    defier mass).
    """

    flags: dict
    measures: dict
    tol: float = 1e-9

    def __getitem__(self, k):
        return self.flags[k]

    def to_dict(self) -> dict:
        return {"tol": self.tol, "flags": dict(self.flags), "measures": {k: float(v) for k, v in self.measures.items()}}


def check_assumptions_batch(mb: ModelBatch, tol: float = 1e-9) -> dict:
    """Dependence measures of A1, A3, A4a, A4b for every model in the batch."""
    g = mb.graph
    meta = _meta(g)
    x, v = meta["x"], meta["v"]
    z, s, y = meta["z"], meta["s"], meta["y"]
    keep = list(dict.fromkeys(x + v + [z, s, y, STRATUM, cf(y, 1), cf(y, 0)]))
    t = potential_joint_batch(mb, keep)
    # the C alias already covers S(1), S(0) for A1
    out = {}
    _, out["A1"] = cond_indep(t, [z], [STRATUM, cf(y, 1), cf(y, 0)], x, tol)
    out["A3"] = t.prob(**{STRATUM: Stratum.DEFIER.code})
    _, out["A4a"] = cond_indep(
        t, [z], [y], x + [STRATUM], tol, where={STRATUM: {Stratum.NEVER.code, Stratum.ALWAYS.code}}
    )
    _, out["A4b"] = cond_indep(t, [y], [STRATUM], x + v + [z, s], tol)
    return out


def check_assumptions(m: StructuralModel, tol: float = 1e-9) -> AssumptionReport:
    """Check A1 (assignment ignorability), A3 (monotonicity), A4a (exclusion
    restriction) and A4b (principal ignorability) on the exact tables.

    A4a is read as ``Z ⊥ Y | X, C`` within the strata with ``S(1) = S(0)``.
    """
    meas = {k: float(np.asarray(val)[0]) for k, val in check_assumptions_batch(m.as_batch(), tol).items()}
    return AssumptionReport({k: val <= tol for k, val in meas.items()}, meas, tol)


# -- sampling --------------------------------------------------------------


def sample(m: StructuralModel, n: int, seed=None) -> pd.DataFrame:
    """Draw ``n`` rows from ``m``; only observed columns are returned.

    Y is an ``Int64`` column with missing entries where R = 0.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValueError(f"n must be a positive integer, got {n!r}")
    rng = np.random.default_rng(seed)
    g = m.graph
    vals = {}
    for v in g.topological_order():
        mech = m.mechanisms[v]
        idx = np.zeros(n, dtype=np.int64)
        for p in mech.parents:
            idx = 2 * idx + vals[p]
        u = rng.random(n)
        vals[v] = (u < mech.table[idx]).astype(np.int64)
    cols = [nd.id for nd in g.nodes if nd.observed]
    df = pd.DataFrame({c: vals[c] for c in cols})
    y = g.role_node(NodeRole.OUTCOME)
    r = g.role_node(NodeRole.RESPONSE)
    if y is not None:
        col = pd.array(vals[y], dtype="Int64")
        if r is not None:
            col[vals[r] == 0] = pd.NA
        df[y] = col
    return df


def write_csv(df: pd.DataFrame, path_or_buf=None) -> str | None:
    """CSV with a header row, LF line endings and empty fields for missing Y."""
    text = df.to_csv(index=False, lineterminator="\n", na_rep="")
    if path_or_buf is None:
        return text
    if hasattr(path_or_buf, "write"):
        path_or_buf.write(text)
    else:
        with open(path_or_buf, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return None
