"""Noncompliance settings, principal strata and effect summaries."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

__all__ = ["Setting", "Stratum", "EffectEstimates", "stratum_code", "strata_for"]


class Setting(str, Enum):
    ONE_SIDED = "one-sided"
    TWO_SIDED = "two-sided"

    @classmethod
    def coerce(cls, value) -> "Setting":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        for s in cls:
            if key in (s.value, s.value.replace("-", "")):
                return s
        raise ValueError(f"unknown setting {value!r}; expected one-sided or two-sided")


class Stratum(str, Enum):
    NEVER = "never-taker"
    DEFIER = "defier"
    COMPLIER = "complier"
    ALWAYS = "always-taker"

    @property
    def code(self) -> int:
        """Index ``2*S(1) + S(0)`` used for the stratum variable in joint tables."""
        return _CODES[self]

    @classmethod
    def from_code(cls, code: int) -> "Stratum":
        return _FROM_CODE[int(code)]

    @property
    def short(self) -> str:
        return {"never-taker": "nace", "defier": "dace", "complier": "cace", "always-taker": "aace"}[self.value]


_CODES = {Stratum.NEVER: 0, Stratum.DEFIER: 1, Stratum.COMPLIER: 2, Stratum.ALWAYS: 3}
_FROM_CODE = {v: k for k, v in _CODES.items()}


def stratum_code(s1: int, s0: int) -> int:
    return 2 * int(s1) + int(s0)


def strata_for(setting: Setting) -> tuple[Stratum, ...]:
    """Strata that can carry mass under monotonicity in ``setting``.

    In the one-sided setting the non-complier stratum is reported as
    ``never-taker``.
    """
    if Setting.coerce(setting) is Setting.ONE_SIDED:
        return (Stratum.COMPLIER, Stratum.NEVER)
    return (Stratum.COMPLIER, Stratum.ALWAYS, Stratum.NEVER)


@dataclass(frozen=True)
class EffectEstimates:
    """Principal causal effects with stratum prevalences.

    Attributes
    ----------
    setting : Setting
    cace, nace : float
        Effects among compliers and never-takers (non-compliers).
    aace : float or None
        Always-taker effect; None in the one-sided setting.
    prevalences : dict
        Stratum name -> probability.
    covariate_dist : dict
        Stratum name -> {covariate configuration: probability}.
    notes : tuple of str
        Warnings attached by the producing routine.

    An effect equal to ``nan`` means the stratum has no mass.
    """

    setting: Setting
    cace: float
    nace: float
    aace: float | None = None
    prevalences: dict = field(default_factory=dict)
    covariate_dist: dict = field(default_factory=dict)
    notes: tuple = ()
    extra: dict = field(default_factory=dict)

    def effects(self) -> dict:
        out = {"cace": self.cace, "nace": self.nace}
        if self.setting is Setting.TWO_SIDED:
            out["aace"] = self.aace
        return out

    def defined(self, name: str) -> bool:
        v = self.effects()[name]
        return v is not None and not math.isnan(v)

    def to_dict(self) -> dict:
        def clean(v):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return None
            return float(v)

        names = self.extra.get("covariates")

        def key(cfg):
            cfg = cfg if isinstance(cfg, tuple) else (cfg,)
            if names and len(names) == len(cfg):
                return ",".join(f"{n}={v}" for n, v in zip(names, cfg))
            return ",".join(str(v) for v in cfg)

        out = {
            "setting": self.setting.value,
            "effects": {k: clean(v) for k, v in self.effects().items()},
            "prevalences": {k: clean(v) for k, v in self.prevalences.items()},
            "covariate_dist": {
                s: {key(cfg): clean(p) for cfg, p in d.items()} for s, d in self.covariate_dist.items()
            },
            "notes": list(self.notes),
        }
        for k in ("approach", "covariates", "w_set", "w_prime", "boxes_passed", "boxes"):
            if k in self.extra:
                out[k] = self.extra[k]
        return out
