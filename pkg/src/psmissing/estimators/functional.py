"""Identification formulas as plug-in functionals on discrete tables.

Every function accepts a full-data :class:`~psmissing.oracle.JointTable`
or an :class:`ObservedTable`. With an observed table the outcome means are
first recovered under MAR (:func:`mar_recover_mean`); with no auxiliary set
that is complete-case analysis within the conditioning cells.

Inputs may be batched tables; results then carry a leading batch axis.
Covariates ``L`` are X for the instrumental-variable route and X plus V for
principal ignorability.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from ..exceptions import (
    AssumptionError,
    IdentificationError,
    MonotonicityError,
    PositivityError,
    RecoveryError,
)
from ..oracle import STRATUM, JointTable, cf, cond_indep
from ..strata import EffectEstimates, Setting, Stratum, strata_for
from ._data import ObservedTable, VariableMap, check_table

__all__ = [
    "Moments",
    "moments",
    "strata_prevalence",
    "strata_covariate_dist",
    "eq1_pce",
    "iv_cace",
    "iv_effects",
    "iv_stratum_means",
    "StratumMeans",
    "pi_effects",
    "mar_recover_mean",
    "RecoveredMean",
    "pce_with_missing",
]

_EPS = 1e-12


def _batched(arr, table):
    return arr if table.batched else arr[None, ...]


def _out(x, batched):
    x = np.asarray(x)
    if batched:
        return x
    return x[0] if x.ndim else x


# -- recovery --------------------------------------------------------------


@dataclass(frozen=True)
class RecoveredMean:
    """``E[Y | given]`` per configuration of ``given`` (``nan`` on empty cells)."""

    given: tuple
    where: dict
    w_set: tuple
    values: np.ndarray
    mass: np.ndarray

    def __call__(self, **cfg):
        idx = tuple(int(cfg[v]) for v in self.given)
        return self.values[(Ellipsis,) + idx] if self.values.ndim > len(self.given) else self.values[idx]


def _parse_target(target):
    from ..conditioning import ConditioningSpec

    spec = ConditioningSpec.parse(target)
    given = [n for n, v in spec.items if v is None]
    where = {n: v for n, v in spec.items if v is not None}
    return given, where


def _recover(o: ObservedTable, given, w_set, where=None):
    """Batched ``(values, mass)`` arrays over ``given`` (where-cells fixed)."""
    where = dict(where or {})
    roles = o.roles
    given = list(given)
    w_set = [w for w in w_set if w not in given and w not in where]
    fixed = list(where)
    vs = fixed + given + w_set
    for v in vs:
        if v == roles.y or v == roles.r:
            raise ValueError("recovery targets may not condition on Y or R")
    full = _batched(o.marginal(vs), o.table)
    resp = _batched(o.marginal(vs + [roles.y], responders=True), o.table)
    # select the where-cells
    for v in fixed:
        full = np.take(full, [int(where[v])], axis=1)
        resp = np.take(resp, [int(where[v])], axis=1)
    nf = len(fixed)
    full = full.reshape(full.shape[:1] + full.shape[1 + nf:])
    resp = resp.reshape(resp.shape[:1] + resp.shape[1 + nf:])
    ng = len(given)
    g_axes = tuple(range(1, 1 + ng))
    w_axes = tuple(range(1 + ng, 1 + ng + len(w_set)))
    p_gw = full
    r_gw = resp.sum(axis=-1)
    y_gw = resp[..., 1]
    empty = (p_gw > 0) & (r_gw <= 0)
    if np.any(empty):
        b, *cell = np.argwhere(empty)[0]
        names = given + w_set
        desc = ", ".join(f"{n}={c}" for n, c in zip(names, cell))
        fix = ", ".join(f"{k}={v}" for k, v in where.items())
        raise RecoveryError(
            f"no responders in cell ({', '.join(x for x in (desc, fix) if x)}) although it has positive "
            "probability; the outcome mean there cannot be recovered"
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        cell_mean = np.where(r_gw > 0, y_gw / np.where(r_gw > 0, r_gw, 1), 0.0)
    p_g = p_gw.sum(axis=w_axes) if w_axes else p_gw
    num = (p_gw * cell_mean).sum(axis=w_axes) if w_axes else p_gw * cell_mean
    with np.errstate(invalid="ignore", divide="ignore"):
        values = np.where(p_g > 0, num / np.where(p_g > 0, p_g, 1), np.nan)
    del g_axes
    return values, p_g


def mar_recover_mean(o: ObservedTable, target, w_set=()) -> RecoveredMean:
    """Recover ``E[Y | target]`` by iterated expectation under MAR.

    ``E[Y | target] = E{ E[Y | target, W, R=1] | target }``.

    Parameters
    ----------
    o : ObservedTable
    target : str or sequence
        Conditioning variables; ``"X,Z=1,S"`` keeps X and S symbolic and
        fixes Z at 1.
    w_set : sequence of str
        Auxiliary variables. For the control arm under one-sided
        noncompliance pass the reduced set W' (see
        :func:`psmissing.missingness.control_arm_aux`).

    Raises
    ------
    RecoveryError
        A cell with positive probability has no responders.
    """
    if not isinstance(o, ObservedTable):
        raise TypeError("mar_recover_mean needs an ObservedTable")
    given, where = _parse_target(target)
    values, mass = _recover(o, given, w_set, where)
    return RecoveredMean(tuple(given), where, tuple(w_set), _out(values, o.batched), _out(mass, o.batched))


# -- moments ---------------------------------------------------------------


@dataclass
class Moments:
    """Cell quantities over covariate configurations ``l`` (batch first).

    ``pl[b, l]``, ``pz1[b, l] = P(Z=1|l)``, ``ps[b, l, z] = P(S=1|l,z)``,
    ``psz[b, l, z, s] = P(l, z, s)``, ``my[b, l, z] = E[Y|l,z]`` and
    ``mys[b, l, z, s] = E[Y|l,z,s]`` (nan on empty cells).
    """

    covariates: tuple
    cards: tuple
    pl: np.ndarray
    pz1: np.ndarray
    ps: np.ndarray
    plzs: np.ndarray
    my: np.ndarray
    mys: np.ndarray
    batched: bool
    notes: list = field(default_factory=list)

    @property
    def configs(self):
        return list(product(*(range(c) for c in self.cards)))


def moments(t, roles: VariableMap | None = None, covariates=None, *, w_set=(), w_prime=None, setting=Setting.TWO_SIDED):
    """Extract the cell quantities used by every formula.

    For an observed table, ``E[Y|l,z,s]`` and ``E[Y|l,z]`` are recovered
    under MAR with ``w_set``. In the one-sided setting ``E[Y|l,Z=0]`` uses
    ``w_prime`` (default ``w_set``) and does not condition on S. Baseline
    variables (X and V roles) left out of ``covariates`` join both recovery
    sets, since the MAR statement conditions on them.
    """
    t, roles, observed = check_table(t, roles)
    setting = Setting.coerce(setting)
    L = list(roles.x if covariates is None else covariates)
    z, s, y = roles.z, roles.s, roles.y
    if observed:
        base = _batched(t.marginal(L + [z, s]), t.table)
    else:
        base = _batched(t.marginal(L + [z, s]), t)
    nb = base.shape[0]
    cards = tuple(base.shape[1:1 + len(L)])
    nl = int(np.prod(cards)) if L else 1
    plzs = base.reshape(nb, nl, 2, 2)
    pl = plzs.sum(axis=(2, 3))
    plz = plzs.sum(axis=3)
    with np.errstate(invalid="ignore", divide="ignore"):
        pz1 = np.where(pl > 0, plz[..., 1] / np.where(pl > 0, pl, 1), np.nan)
        ps = np.where(plz > 0, plzs[..., 1] / np.where(plz > 0, plz, 1), np.nan)
    live = pl > _EPS if not observed or t.n is None else pl > 0
    bad = live & ~((pz1 > 0) & (pz1 < 1))
    if np.any(bad):
        b, li = np.argwhere(bad)[0]
        cfg = list(product(*(range(c) for c in cards)))[li]
        raise PositivityError(
            "assignment positivity fails at " + (", ".join(f"{n}={v}" for n, v in zip(L, cfg)) or "the empty covariate set")
            + f": P({z}=1 | covariates) = {pz1[b, li]:.6g}"
        )
    if observed:
        # MAR conditions on every baseline variable, not only on L
        outside = [v for v in roles.x + roles.v if v not in L]
        w = list(dict.fromkeys(outside + list(w_set)))
        wp = list(dict.fromkeys(outside + list(w_set if w_prime is None else w_prime)))
        mys, _ = _recover(t, L + [z, s], w)
        mys = mys.reshape(nb, nl, 2, 2)
        with np.errstate(invalid="ignore"):
            my = np.nansum(np.nan_to_num(mys) * plzs, axis=3) / np.where(plz > 0, plz, 1)
        my = np.where(plz > 0, my, np.nan)
        if setting is Setting.ONE_SIDED:
            m0, _ = _recover(t, L, wp, {z: 0})
            my[..., 0] = m0.reshape(nb, nl)
    else:
        arr = _batched(t.marginal(L + [z, s, y]), t).reshape(nb, nl, 2, 2, 2)
        with np.errstate(invalid="ignore", divide="ignore"):
            mys = np.where(plzs > 0, arr[..., 1] / np.where(plzs > 0, plzs, 1), np.nan)
            num = arr[..., 1].sum(axis=3)
            my = np.where(plz > 0, num / np.where(plz > 0, plz, 1), np.nan)
    return Moments(tuple(L), cards, pl, pz1, ps, plzs, my, mys, bool(t.batched))


# -- strata ----------------------------------------------------------------


def _weights(m: Moments, setting: Setting):
    """Per-cell stratum probabilities ``P(C=c | l)`` (batch, l)."""
    p1, p0 = m.ps[..., 1], m.ps[..., 0]
    if setting is Setting.ONE_SIDED:
        if np.any(np.nan_to_num(p0) > _EPS):
            raise AssumptionError("one-sided noncompliance assumed but S=1 occurs under Z=0")
        return {Stratum.COMPLIER: p1, Stratum.NEVER: 1.0 - p1}
    return {Stratum.COMPLIER: p1 - p0, Stratum.ALWAYS: p0, Stratum.NEVER: 1.0 - p1}


def _prevalence_arrays(m: Moments, setting: Setting):
    w = _weights(m, setting)
    prev = {c: np.nansum(m.pl * wc, axis=1) for c, wc in w.items()}
    if np.any(prev[Stratum.COMPLIER] < -_EPS):
        raise MonotonicityError(
            "estimated complier mass is negative: P(S=1|X,Z=1) - P(S=1|X,Z=0) averages below zero"
        )
    return w, prev


def strata_prevalence(t, setting, roles=None, covariates=None) -> dict:
    """Stratum prevalences identified from ``P(S | X, Z)``.

    Returns a dict stratum name -> probability (arrays for batched input).
    """
    setting = Setting.coerce(setting)
    m = moments(t, roles, covariates, setting=setting) if not isinstance(t, Moments) else t
    _, prev = _prevalence_arrays(m, setting)
    return {c.value: _out(v, m.batched) for c, v in prev.items()}


def strata_covariate_dist(t, setting, roles=None, covariates=None, strata=None) -> dict:
    """``P(X | C)`` for each stratum by Bayes reweighting of ``P(X)``.

    Returns stratum name -> {covariate configuration tuple: probability}.
    Strata without mass are omitted unless requested through ``strata``, in
    which case they raise IdentificationError.
    """
    setting = Setting.coerce(setting)
    m = moments(t, roles, covariates, setting=setting) if not isinstance(t, Moments) else t
    w, prev = _prevalence_arrays(m, setting)
    wanted = strata_for(setting) if strata is None else [Stratum(s) for s in strata]
    out = {}
    for c in wanted:
        mass = prev[c]
        if np.any(mass <= _EPS):
            if strata is not None:
                raise IdentificationError(f"stratum {c.value} has zero prevalence")
            continue
        dens = m.pl * np.nan_to_num(w[c]) / mass[:, None]
        if np.any(dens < -_EPS):
            raise MonotonicityError(f"negative weight for stratum {c.value} at some covariate value")
        dens = _out(dens, m.batched)
        out[c.value] = {cfg: dens[..., i] for i, cfg in enumerate(m.configs)}
        if not m.batched:
            out[c.value] = {k: float(v) for k, v in out[c.value].items()}
    return out


# -- potential-outcome identity --------------------------------------------


def eq1_pce(pj: JointTable, covariates=None, tol: float = 1e-9) -> EffectEstimates | dict:
    """Stratum effects as covariate-averaged arm contrasts within strata.

    Evaluates ``E_{X|C}{ E[Y|X,Z=1,C] - E[Y|X,Z=0,C] }`` on a cross-world
    table that carries the stratum alias ``C``.

    Raises
    ------
    AssumptionError
        Assignment ignorability fails in ``pj``.
    IdentificationError
        A stratum with mass has an empty (X, Z, C) cell.
    """
    meta = pj.meta
    x = list(meta.get("x", []) if covariates is None else covariates)
    z, y = meta["z"], meta["y"]
    if STRATUM not in pj:
        raise ValueError("table has no stratum variable C")
    targets = [STRATUM] + [v for v in (cf(y, 1), cf(y, 0)) if v in pj]
    ok, dep = cond_indep(pj, [z], targets, x, tol)
    if not np.all(ok):
        raise AssumptionError(f"assignment ignorability fails (dependence {np.max(dep):.3g})")
    arr = _batched(pj.marginal(x + [STRATUM, z, y]), pj)
    nb = arr.shape[0]
    nl = int(np.prod(arr.shape[1:1 + len(x)])) if x else 1
    arr = arr.reshape(nb, nl, 4, 2, 2)
    pxcz = arr.sum(axis=4)
    pxc = pxcz.sum(axis=3)
    pc = pxc.sum(axis=1)
    need = (pxc > _EPS)[..., None] & (pxcz <= _EPS)
    if np.any(need):
        raise IdentificationError("empty (X, Z, C) cell in a stratum with mass")
    with np.errstate(invalid="ignore", divide="ignore"):
        ey = np.where(pxcz > _EPS, arr[..., 1] / np.where(pxcz > _EPS, pxcz, 1), 0.0)
        contrast = ey[..., 1] - ey[..., 0]
        eff = np.where(pc > _EPS, (pxc * contrast).sum(axis=1) / np.where(pc > _EPS, pc, 1), np.nan)
    setting = Setting.ONE_SIDED if np.all(pc[:, Stratum.ALWAYS.code] <= _EPS) and np.all(
        pc[:, Stratum.DEFIER.code] <= _EPS
    ) else Setting.TWO_SIDED
    return _estimates(setting, eff, pc, pj.batched)


def _estimates(setting, eff, pc, batched, notes=(), extra=None, m: Moments | None = None):
    """EffectEstimates (or a dict of arrays for batches) from code-indexed arrays."""
    names = strata_for(setting)
    if batched:
        out = {s.short: eff[:, s.code] for s in names}
        out["prevalences"] = {s.value: pc[:, s.code] for s in names}
        return out
    prev = {s.value: float(pc[0, s.code]) for s in names}
    covdist = {}
    extra = dict(extra or {})
    if m is not None:
        covdist = strata_covariate_dist(m, setting)
        extra.setdefault("covariates", list(m.covariates))
    return EffectEstimates(
        setting=setting,
        cace=float(eff[0, Stratum.COMPLIER.code]),
        nace=float(eff[0, Stratum.NEVER.code]),
        aace=float(eff[0, Stratum.ALWAYS.code]) if setting is Setting.TWO_SIDED else None,
        prevalences=prev,
        covariate_dist=covdist,
        notes=tuple(notes),
        extra=extra,
    )


# -- instrumental variable route -------------------------------------------


def _iv_cace_from(m: Moments, setting):
    w, prev = _prevalence_arrays(m, setting)
    denom = prev[Stratum.COMPLIER]
    if np.any(denom <= _EPS):
        raise IdentificationError("no compliers: the IV denominator is zero")
    num = np.nansum(m.pl * (m.my[..., 1] - m.my[..., 0]), axis=1)
    return num / denom


def iv_cace(t, setting, roles=None, covariates=None, *, w_set=(), w_prime=None):
    """Complier effect by the covariate-adjusted IV (Wald) formula.

    ``E{E[Y|X,Z=1] - E[Y|X,Z=0]} / E[P(S=1|X,Z=1) - P(S=1|X,Z=0)]``; in the
    one-sided setting the second term of the denominator is zero.
    """
    setting = Setting.coerce(setting)
    m = moments(t, roles, covariates, w_set=w_set, w_prime=w_prime, setting=setting)
    return _out(_iv_cace_from(m, setting), m.batched)


@dataclass(frozen=True)
class StratumMeans:
    """``E[Y | l, Z=z, C]`` per stratum: arrays over (l, z), batch first if batched.

    ``out_of_range`` lists ``(stratum, z, covariate config, value)`` for means
    outside the outcome range [0, 1].
    """

    covariates: tuple
    configs: tuple
    means: dict
    out_of_range: tuple
    setting: Setting

    @property
    def in_range(self) -> bool:
        return not self.out_of_range


def _iv_means(m: Moments, setting, tol=1e-12):
    p1, p0 = m.ps[..., 1], m.ps[..., 0]
    m1, m0 = m.my[..., 1], m.my[..., 0]

    def z0(a, b):
        # 0 * nan = 0 when the cell weight is zero
        return np.where(a == 0, 0.0, a * np.nan_to_num(b))

    live = m.pl > _EPS
    if setting is Setting.ONE_SIDED:
        _weights(m, setting)
        dc = p1
        n_mean = m.mys[..., 1, 0]
        rest = z0(1 - p1, n_mean)
        means = {
            Stratum.NEVER: np.stack([n_mean, n_mean], axis=-1),
        }
    else:
        dc = p1 - p0
        a_mean = m.mys[..., 0, 1]
        n_mean = m.mys[..., 1, 0]
        rest = z0(p0, a_mean) + z0(1 - p1, n_mean)
        means = {
            Stratum.ALWAYS: np.stack([a_mean, a_mean], axis=-1),
            Stratum.NEVER: np.stack([n_mean, n_mean], axis=-1),
        }
    if np.any(live & (dc <= tol)):
        raise IdentificationError("zero complier mass at some covariate value")
    if np.any(live & (dc < 0)):
        raise MonotonicityError("negative complier mass at some covariate value")
    with np.errstate(invalid="ignore", divide="ignore"):
        c1 = (m1 - rest) / dc
        c0 = (m0 - rest) / dc
    means[Stratum.COMPLIER] = np.stack([c0, c1], axis=-1)
    return means


def iv_stratum_means(t, setting, roles=None, covariates=None, *, w_set=(), w_prime=None, tol: float = 1e-12) -> StratumMeans:
    """Stratum outcome means implied by monotonicity and the exclusion restriction.

    Always-takers and never-takers take their observed cell means in both
    arms; the complier means solve the arm mixtures.
    """
    setting = Setting.coerce(setting)
    m = moments(t, roles, covariates, w_set=w_set, w_prime=w_prime, setting=setting)
    means = _iv_means(m, setting)
    flags = []
    configs = m.configs
    for c, arr in means.items():
        bad = (arr < -tol) | (arr > 1 + tol)
        for idx in np.argwhere(bad & (m.pl[..., None] > _EPS)):
            b, li, zz = idx
            flags.append((c.value, int(zz), configs[li], float(arr[b, li, zz])))
    out = {c.value: _out(a, m.batched) for c, a in means.items()}
    return StratumMeans(tuple(m.covariates), tuple(configs), out, tuple(flags), setting)


def _average(m: Moments, contrast, weight):
    """``E[contrast * weight] / E[weight]`` over covariate cells, per batch."""
    w = np.where(m.pl > _EPS, weight, 0.0)
    denom = np.sum(m.pl * w, axis=1)
    live = w * m.pl > _EPS
    if np.any(live & np.isnan(contrast)):
        raise IdentificationError("empty outcome cell where the stratum weight is positive")
    num = np.sum(np.where(live, m.pl * w * np.nan_to_num(contrast), 0.0), axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(denom > _EPS, num / np.where(denom > _EPS, denom, 1), np.nan), denom


def iv_effects(t, setting, roles=None, covariates=None, *, w_set=(), w_prime=None, notes=()):
    """All stratum effects under the IV assumptions.

    The complier effect comes from the IV formula; the other effects average
    within-stratum arm contrasts of :func:`iv_stratum_means`, which the
    exclusion restriction makes exactly zero.
    """
    setting = Setting.coerce(setting)
    m = moments(t, roles, covariates, w_set=w_set, w_prime=w_prime, setting=setting)
    return _iv_from_moments(m, setting, notes)


def _iv_from_moments(m, setting, notes=()):
    w, prev = _prevalence_arrays(m, setting)
    cace = _iv_cace_from(m, setting)
    means = _iv_means(m, setting)
    nb = m.pl.shape[0]
    eff = np.full((nb, 4), np.nan)
    pc = np.zeros((nb, 4))
    for c, p in prev.items():
        pc[:, c.code] = p
    eff[:, Stratum.COMPLIER.code] = cace
    for c in strata_for(setting):
        if c is Stratum.COMPLIER:
            continue
        arr = means[c]
        eff[:, c.code], _ = _average(m, arr[..., 1] - arr[..., 0], w[c])
    return _estimates(setting, eff, pc, m.batched, notes, m=m)


# -- principal ignorability -----------------------------------------------


def pi_effects(t, setting, v_set=None, roles=None, *, w_set=(), notes=()):
    """Stratum effects under principal ignorability given ``X`` and ``v_set``.

    Each effect averages an observed-cell contrast with weight
    ``p1 - p0`` (compliers), ``1 - p1`` (never-takers) or ``p0``
    (always-takers), where ``pz = P(S=1 | X, V, Z=z)``.
    """
    setting = Setting.coerce(setting)
    t, roles, observed = check_table(t, roles)
    v = list(roles.v if v_set is None else v_set)
    L = list(dict.fromkeys(list(roles.x) + v))
    m = moments(t, roles, L, w_set=w_set, w_prime=w_set, setting=setting)
    return _pi_from_moments(m, setting, notes)


def _pi_from_moments(m, setting, notes=()):
    w, prev = _prevalence_arrays(m, setting)
    nb = m.pl.shape[0]
    eff = np.full((nb, 4), np.nan)
    pc = np.zeros((nb, 4))
    for c, p in prev.items():
        pc[:, c.code] = p
    mys, my = m.mys, m.my
    if setting is Setting.ONE_SIDED:
        contrasts = {
            Stratum.COMPLIER: mys[..., 1, 1] - my[..., 0],
            Stratum.NEVER: mys[..., 1, 0] - my[..., 0],
        }
    else:
        contrasts = {
            Stratum.COMPLIER: mys[..., 1, 1] - mys[..., 0, 0],
            Stratum.NEVER: mys[..., 1, 0] - mys[..., 0, 0],
            Stratum.ALWAYS: mys[..., 1, 1] - mys[..., 0, 1],
        }
    for c, con in contrasts.items():
        val, denom = _average(m, con, w[c])
        if np.any(denom <= _EPS):
            raise IdentificationError(f"stratum {c.value} has zero weight")
        eff[:, c.code] = val
    return _estimates(setting, eff, pc, m.batched, notes, m=m)


# -- missing outcomes ------------------------------------------------------


def pce_with_missing(
    o,
    approach: str,
    setting,
    v_set=None,
    w_set=(),
    *,
    graph=None,
    w_prime=None,
    roles=None,
):
    """Effects from an observed table with MAR recovery of the outcome means.

    Parameters
    ----------
    o : ObservedTable, DataFrame or full-data JointTable (masked first)
    approach : {"iv", "pi"}
    setting : Setting
    v_set : sequence of str, optional
        Extra covariates for the ``"pi"`` route (default: V-role columns).
    w_set : sequence of str
        Auxiliary variables for recovery.
    graph : CausalGraph, optional
        If given, the box checks are attached (``extra['boxes']``), a note
        is added when no box passes, and for one-sided IV the control-arm
        set W' is derived from it unless ``w_prime`` is supplied.
    w_prime : sequence of str, optional
        Control-arm auxiliary set for one-sided IV.
    """
    setting = Setting.coerce(setting)
    approach = str(approach).lower()
    if approach not in ("iv", "pi"):
        raise ValueError("approach must be 'iv' or 'pi'")
    if isinstance(o, JointTable):
        o = ObservedTable.from_joint(o, roles)
    o, roles, _ = check_table(o, roles)
    w_set = tuple(w_set)
    notes, boxes = [], None
    if graph is not None:
        from ..missingness import check_box, control_arm_aux

        boxes = {}
        arms = (1, 0) if setting is Setting.ONE_SIDED else (1,)
        for box in ((1,) if not w_set else ()) + (2, 3):
            boxes[str(box)] = {str(a): check_box(graph, box, w_set, setting, a).to_dict() for a in arms}
        passed = [b for b, per in boxes.items() if all(r["passed"] for r in per.values())]
        if not passed:
            desc = "{" + ", ".join(w_set) + "}"
            msg = f"auxiliary set {desc} satisfies none of the MAR boxes; recovered means may be biased"
            notes.append(msg)
            warnings.warn(msg, UserWarning, stacklevel=2)
        if approach == "iv" and setting is Setting.ONE_SIDED and w_prime is None:
            w_prime = control_arm_aux(graph, w_set)
    if approach == "iv":
        m = moments(o, roles, None, w_set=w_set, w_prime=w_prime, setting=setting)
        res = _iv_from_moments(m, setting, notes)
    else:
        v = list(roles.v if v_set is None else v_set)
        L = list(dict.fromkeys(list(roles.x) + v))
        m = moments(o, roles, L, w_set=w_set, w_prime=w_set, setting=setting)
        res = _pi_from_moments(m, setting, notes)
    if isinstance(res, EffectEstimates):
        extra = dict(res.extra)
        extra["approach"] = approach
        extra["w_set"] = list(w_set)
        if w_prime is not None:
            extra["w_prime"] = list(w_prime)
        if boxes is not None:
            extra["boxes"] = boxes
            extra["boxes_passed"] = [b for b, per in boxes.items() if all(r["passed"] for r in per.values())]
        res = EffectEstimates(res.setting, res.cace, res.nace, res.aace, res.prevalences, res.covariate_dist, res.notes, extra)
    return res
