"""Observed-data tables and input validation for the estimators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pandas as pd

from ..oracle import JointTable

__all__ = ["VariableMap", "ObservedTable", "check_table", "MISSING"]

MISSING = 2  # state of Y in an observed table when R = 0


@dataclass(frozen=True)
class VariableMap:
    """Names of the analysis variables.

    Parameters
    ----------
    x, v, w : tuple of str
        Baseline covariates, extra baseline covariates used by principal
        ignorability, and auxiliary variables.
    z, s, y, r : str
    """

    x: tuple = ("X",)
    v: tuple = ()
    w: tuple = ()
    z: str = "Z"
    s: str = "S"
    y: str = "Y"
    r: str = "R"

    def __post_init__(self):
        for k in ("x", "v", "w"):
            val = getattr(self, k)
            object.__setattr__(self, k, (val,) if isinstance(val, str) else tuple(val))

    @classmethod
    def infer(cls, names, meta=None, **override) -> "VariableMap":
        """Use table metadata when present, else id conventions (X*, V*, W*)."""
        names = list(names)
        meta = meta or {}
        if meta.get("z"):
            base = dict(
                x=tuple(meta.get("x", ())),
                v=tuple(meta.get("v", ())),
                w=tuple(meta.get("w", ())),
                z=meta["z"],
                s=meta.get("s") or "S",
                y=meta.get("y") or "Y",
                r=meta.get("r") or "R",
            )
        else:
            base = dict(
                x=tuple(n for n in names if n.startswith("X")),
                v=tuple(n for n in names if n.startswith("V")),
                w=tuple(n for n in names if n.startswith("W")),
            )
        base.update({k: v for k, v in override.items() if v is not None})
        return cls(**base)

    @property
    def observed(self) -> tuple:
        return tuple(dict.fromkeys(self.x + self.v + self.w + (self.z, self.s, self.r, self.y)))


class ObservedTable:
    """Distribution of the observed data.

    The outcome has three states: 0 and 1 where ``R = 1`` and
    :data:`MISSING` where ``R = 0``. Probabilities involving Y are only
    available jointly with ``R = 1``.

    Parameters
    ----------
    table : JointTable
        Over the observed variables with Y coded as above.
    roles : VariableMap
    n : int, optional
        Sample size when built from data.
    """

    def __init__(self, table: JointTable, roles: VariableMap, n: int | None = None):
        self.table = table
        self.roles = roles
        self.n = n
        for v in roles.observed:
            if v not in table:
                raise ValueError(f"observed table lacks variable {v!r}")
        if table.card(roles.y) != 3:
            raise ValueError("Y must have three states (0, 1, missing)")
        arr = table.marginal([roles.r, roles.y])
        off = int(table.batched)
        answered_missing = np.take(np.take(arr, 1, axis=off), MISSING, axis=off)
        unanswered_seen = np.take(np.take(arr, 0, axis=off), [0, 1], axis=off)
        if np.any(answered_missing > 0) or np.any(unanswered_seen > 0):
            raise ValueError("Y must be missing exactly when R = 0")

    def __repr__(self):
        return f"ObservedTable(vars={self.table.vars}, n={self.n})"

    @property
    def batched(self) -> bool:
        return self.table.batched

    @property
    def vars(self):
        return self.table.vars

    def card(self, v) -> int:
        return self.table.card(v)

    def marginal(self, vs, *, responders=False) -> np.ndarray:
        """Probabilities over ``vs``.

        With ``responders=True`` the result is ``P(vs, R=1)`` and Y, if
        requested, has two states. Without it, asking for Y is an error.
        """
        vs = list(vs)
        y, r = self.roles.y, self.roles.r
        if not responders:
            if y in vs:
                raise ValueError("Y is only defined jointly with R = 1; pass responders=True")
            return self.table.marginal(vs)
        if r in vs:
            raise ValueError("R is fixed at 1 in a responders query")
        arr = self.table.marginal(vs + [r])
        arr = np.take(arr, 1, axis=arr.ndim - 1)
        if y in vs:
            arr = np.take(arr, [0, 1], axis=int(self.batched) + vs.index(y))
        return arr

    @classmethod
    def from_joint(cls, t: JointTable, roles: VariableMap | None = None) -> "ObservedTable":
        """Mask the outcome of a full-data joint where R = 0."""
        roles = roles or VariableMap.infer(t.vars, t.meta)
        vs = [v for v in roles.observed if v != roles.y]
        arr = t.marginal(vs + [roles.y])
        off = int(t.batched)
        r_ax = off + vs.index(roles.r)
        y_ax = arr.ndim - 1
        out = np.zeros(arr.shape[:-1] + (3,))
        obs = np.take(arr, [1], axis=r_ax)
        mis = np.take(arr, [0], axis=r_ax)
        idx_obs = [slice(None)] * out.ndim
        idx_obs[r_ax] = slice(1, 2)
        idx_obs[y_ax] = slice(0, 2)
        out[tuple(idx_obs)] = obs
        idx_mis = [slice(None)] * out.ndim
        idx_mis[r_ax] = slice(0, 1)
        idx_mis[y_ax] = slice(2, 3)
        out[tuple(idx_mis)] = mis.sum(axis=y_ax, keepdims=True)
        jt = JointTable(vs + [roles.y], out, batched=t.batched, meta=t.meta, check=False)
        return cls(jt, roles)

    @classmethod
    def from_frame(cls, df: pd.DataFrame, roles: VariableMap | None = None) -> "ObservedTable":
        """Empirical distribution of a data frame (no smoothing).

        Y may contain missing values, which must coincide with ``R == 0``.
        Other columns must hold non-negative integer codes.
        """
        roles = roles or VariableMap.infer(df.columns)
        missing = [v for v in roles.observed if v not in df.columns]
        if missing:
            raise ValueError(f"data lacks columns: {', '.join(missing)}")
        if len(df) == 0:
            raise ValueError("data has no rows")
        vs = [v for v in roles.observed if v != roles.y]
        codes, cards = [], []
        for v in vs:
            col = df[v]
            if col.isna().any():
                raise ValueError(f"column {v} has missing values")
            vals = col.to_numpy()
            if not np.all(np.equal(np.mod(vals, 1), 0)) or vals.min() < 0:
                raise ValueError(f"column {v} must hold non-negative integer codes")
            vals = vals.astype(np.int64)
            codes.append(vals)
            cards.append(max(2, int(vals.max()) + 1))
        y = df[roles.y]
        r = codes[vs.index(roles.r)]
        if cards[vs.index(roles.r)] != 2:
            raise ValueError("R must be binary")
        ymiss = y.isna().to_numpy()
        if np.any(ymiss != (r == 0)):
            raise ValueError("Y must be missing exactly when R = 0")
        yv = np.where(ymiss, MISSING, y.fillna(0).to_numpy()).astype(np.int64)
        if np.any((yv != MISSING) & ((yv < 0) | (yv > 1))):
            raise ValueError("Y must be binary")
        codes.append(yv)
        cards.append(3)
        flat = np.ravel_multi_index(codes, cards)
        counts = np.bincount(flat, minlength=int(np.prod(cards))).reshape(cards)
        jt = JointTable(vs + [roles.y], counts / len(df), check=False)
        return cls(jt, roles, n=len(df))


def check_table(data, roles: VariableMap | None = None):
    """Validate estimator input.

    Returns ``(table, roles, observed)`` where ``table`` is a JointTable
    (full data) or an ObservedTable, and ``observed`` tells which.
    """
    if isinstance(data, ObservedTable):
        return data, roles or data.roles, True
    if isinstance(data, pd.DataFrame):
        o = ObservedTable.from_frame(data, roles)
        return o, o.roles, True
    if isinstance(data, JointTable):
        roles = roles or VariableMap.infer(data.vars, data.meta)
        for v in roles.x + roles.v + (roles.z, roles.s, roles.y):
            if v not in data:
                raise ValueError(f"table lacks variable {v!r}")
        for v in (roles.z, roles.s, roles.y):
            if data.card(v) != 2:
                raise ValueError(f"{v} must be binary")
        return data, roles, False
    raise TypeError(f"expected a JointTable, ObservedTable or DataFrame, got {type(data).__name__}")
