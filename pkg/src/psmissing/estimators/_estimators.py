"""Estimator objects with the scikit-learn fit/attribute convention."""

from __future__ import annotations

from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from ..oracle import JointTable
from ..strata import Setting
from . import functional as F
from ._data import VariableMap

__all__ = ["IVEstimator", "PIEstimator", "PrincipalEffectEstimator"]


class _Base(BaseEstimator):
    """Shared fit logic.

    ``fit`` accepts a full-data JointTable, an ObservedTable or a DataFrame
    (rows from :func:`psmissing.oracle.sample`). A JointTable is read as
    complete data; observed tables and frames go through MAR recovery with
    ``w_set``.
    """

    approach = None

    def _roles(self):
        if self.roles is not None:
            return self.roles if isinstance(self.roles, VariableMap) else VariableMap(**self.roles)
        return None

    def fit(self, data, y=None):
        setting = Setting.coerce(self.setting)
        roles = self._roles()
        if isinstance(data, JointTable):
            # full data: no outcome is missing
            if str(self.approach).lower() == "iv":
                est = F.iv_effects(data, setting, roles)
            else:
                est = F.pi_effects(data, setting, self.v_set, roles)
        else:
            est = F.pce_with_missing(
                data,
                self.approach,
                setting,
                v_set=self.v_set,
                w_set=tuple(self.w_set or ()),
                graph=self.graph,
                w_prime=getattr(self, "w_prime", None),
                roles=roles,
            )
        self.estimates_ = est
        self.cace_ = est.cace
        self.nace_ = est.nace
        self.aace_ = est.aace
        self.prevalences_ = dict(est.prevalences)
        self.covariate_dist_ = dict(est.covariate_dist)
        self.notes_ = list(est.notes)
        return self

    def _check(self):
        if not hasattr(self, "estimates_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet; call fit first")

    def effects(self) -> dict:
        """Fitted effects keyed by short name (``cace``, ``nace``, ``aace``)."""
        self._check()
        return self.estimates_.effects()

    def to_dict(self) -> dict:
        self._check()
        return self.estimates_.to_dict()


class IVEstimator(_Base):
    """Principal effects under monotonicity and the exclusion restriction.

    Parameters
    ----------
    setting : {"one-sided", "two-sided"}
    w_set : tuple of str
        Auxiliary variables for MAR recovery of outcome means.
    w_prime : tuple of str, optional
        Control-arm auxiliary set (one-sided only); derived from ``graph``
        when omitted.
    graph : CausalGraph, optional
        Attach missingness box checks to the estimates.
    roles : VariableMap or dict, optional

    Attributes
    ----------
    cace_, nace_, aace_ : float
    prevalences_ : dict
    covariate_dist_ : dict
    estimates_ : EffectEstimates
    """

    approach = "iv"

    def __init__(self, setting="two-sided", w_set=(), w_prime=None, graph=None, roles=None):
        self.setting = setting
        self.w_set = w_set
        self.w_prime = w_prime
        self.graph = graph
        self.roles = roles

    @property
    def v_set(self):
        return None


class PIEstimator(_Base):
    """Principal effects under principal ignorability given X and ``v_set``.

    Parameters
    ----------
    setting : {"one-sided", "two-sided"}
    v_set : tuple of str, optional
        Extra baseline covariates; defaults to the V-role variables.
    w_set, graph, roles
        As for :class:`IVEstimator`.
    """

    approach = "pi"

    def __init__(self, setting="two-sided", v_set=None, w_set=(), graph=None, roles=None):
        self.setting = setting
        self.v_set = v_set
        self.w_set = w_set
        self.graph = graph
        self.roles = roles


class PrincipalEffectEstimator(_Base):
    """Front end that picks the identification route by name.

    Parameters
    ----------
    approach : {"iv", "pi"}
    """

    def __init__(self, approach="iv", setting="two-sided", v_set=None, w_set=(), w_prime=None, graph=None, roles=None):
        self.approach = approach
        self.setting = setting
        self.v_set = v_set
        self.w_set = w_set
        self.w_prime = w_prime
        self.graph = graph
        self.roles = roles

    def fit(self, data, y=None):
        if str(self.approach).lower() not in ("iv", "pi"):
            raise ValueError("approach must be 'iv' or 'pi'")
        return super().fit(data, y)
