"""The five CATE meta-learners behind one interface.

* ``single`` (S-learner): one outcome model on ``[x, w]``;
  ``tau(x) = f(x, 1) - f(x, 0)``.
* ``two`` (T-learner): one outcome model per group; ``tau = mu1 - mu0``.
* ``x`` (X-learner): group outcome models, imputed effects
  ``y - mu0(x)`` on treated and ``mu1(x) - y`` on control rows, one effect model
  per group, combined as ``e(x) tau0(x) + (1 - e(x)) tau1(x)``.
* ``r`` (R-learner): cross-fitted ``m(x) = E[Y|x]`` and ``e(x)``; weighted
  regression of ``(y - m) / (w - e)`` with weight ``(w - e)**2``.
* ``dr`` (DR-learner): cross-fitted ``mu0, mu1, e``; regression of the
  doubly-robust pseudo-outcome on ``x``.

Nuisance cross-fitting uses two folds assigned by row *content* rather than
row position, so refitting on a permuted copy of the data reproduces the
same folds.
"""

from __future__ import annotations

from enum import Enum
from typing import Optional, Union

import numpy as np

from catekit._seeding import derive_seed
from catekit.base_learners import (
    DEFAULT_CLIP,
    BaseLearnerConfig,
    ConstantPropensity,
    fit_propensity,
    fit_regressor,
)
from catekit.dataset import FoldAssignment, ObservedDataset, as_covariates, kfold_partition
from catekit.errors import ConfigurationError, DataError, DiagnosticError, FoldError

# minimum |w - e| in the R-learner's final stage
R_RESIDUAL_FLOOR = 0.01
CROSS_FIT_FOLDS = 2


class AlgorithmKind(str, Enum):
    SINGLE = "single"
    TWO = "two"
    X = "x"
    R = "r"
    DR = "dr"

    @classmethod
    def parse(cls, value) -> "AlgorithmKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower()
        aliases = {
            "s": "single", "singlemodel": "single", "s-learner": "single",
            "t": "two", "twomodel": "two", "t-learner": "two",
            "xlearner": "x", "x-learner": "x",
            "rlearner": "r", "r-learner": "r",
            "drlearner": "dr", "dr-learner": "dr",
        }
        key = aliases.get(key, key)
        try:
            return cls(key)
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ConfigurationError(f"unknown algorithm {value!r}; expected one of {valid}") from None


ALL_KINDS = tuple(AlgorithmKind)
Propensity = Union[float, str]


class CateModel:
    """A fitted CATE estimator."""

    kind: AlgorithmKind

    def __init__(self, n_features: int):
        self.n_features = int(n_features)

    def _check(self, x):
        x = as_covariates(x)
        if x.shape[1] != self.n_features:
            raise DataError(
                f"model was trained on {self.n_features} features, got {x.shape[1]}"
            )
        return x

    def predict_cate(self, x) -> np.ndarray:
        raise NotImplementedError

    def learning_target(self, data: ObservedDataset) -> Optional[np.ndarray]:
        """Effect-scale training target per row, or ``None`` when the learner
        only fits outcome-scale targets."""
        return None


class SingleModel(CateModel):
    kind = AlgorithmKind.SINGLE

    def __init__(self, n_features, outcome_model):
        super().__init__(n_features)
        self.outcome_model = outcome_model

    def predict_cate(self, x):
        x = self._check(x)
        n = x.shape[0]
        f1 = self.outcome_model.predict(np.column_stack([x, np.ones(n)]))
        f0 = self.outcome_model.predict(np.column_stack([x, np.zeros(n)]))
        return f1 - f0


class TwoModel(CateModel):
    kind = AlgorithmKind.TWO

    def __init__(self, n_features, mu0, mu1):
        super().__init__(n_features)
        self.mu0 = mu0
        self.mu1 = mu1

    def predict_cate(self, x):
        x = self._check(x)
        return self.mu1.predict(x) - self.mu0.predict(x)


class XLearner(CateModel):
    kind = AlgorithmKind.X

    def __init__(self, n_features, mu0, mu1, tau0, tau1, propensity):
        super().__init__(n_features)
        self.mu0 = mu0
        self.mu1 = mu1
        self.tau0 = tau0
        self.tau1 = tau1
        self.propensity = propensity

    def predict_cate(self, x):
        x = self._check(x)
        e = self.propensity.predict(x)
        return e * self.tau0.predict(x) + (1.0 - e) * self.tau1.predict(x)

    def learning_target(self, data):
        x = self._check(data.x)
        treated = data.w == 1
        return np.where(treated, data.y - self.mu0.predict(x), self.mu1.predict(x) - data.y)


class _CrossFitted(CateModel):
    """Shared plumbing for learners with cross-fitted nuisances."""

    def __init__(self, n_features, folds, final_model):
        super().__init__(n_features)
        self.folds = folds
        self.final_model = final_model

    def predict_cate(self, x):
        return self.final_model.predict(self._check(x))

    def _nuisance(self, models, x, n_train):
        """Out-of-fold nuisance values on the training rows; on other data
        the fold models' average."""
        if x.shape[0] == n_train:
            out = np.empty(x.shape[0])
            for j, m in enumerate(models):
                idx = self.folds.members(j)
                out[idx] = m.predict(x[idx])
            return out
        return np.mean([m.predict(x) for m in models], axis=0)


class RLearner(_CrossFitted):
    kind = AlgorithmKind.R

    def __init__(self, n_features, folds, final_model, m_models, e_models):
        super().__init__(n_features, folds, final_model)
        self.m_models = m_models
        self.e_models = e_models

    def residuals(self, data):
        x = self._check(data.x)
        m = self._nuisance(self.m_models, x, len(self.folds.fold_of))
        e = self._nuisance(self.e_models, x, len(self.folds.fold_of))
        ry = data.y - m
        rw = clip_residual(data.w - e)
        return ry, rw

    def learning_target(self, data):
        ry, rw = self.residuals(data)
        return ry / rw


class DRLearner(_CrossFitted):
    kind = AlgorithmKind.DR

    def __init__(self, n_features, folds, final_model, mu0_models, mu1_models, e_models):
        super().__init__(n_features, folds, final_model)
        self.mu0_models = mu0_models
        self.mu1_models = mu1_models
        self.e_models = e_models

    def learning_target(self, data):
        x = self._check(data.x)
        n_train = len(self.folds.fold_of)
        m0 = self._nuisance(self.mu0_models, x, n_train)
        m1 = self._nuisance(self.mu1_models, x, n_train)
        e = self._nuisance(self.e_models, x, n_train)
        return dr_pseudo_outcome(data.w, data.y, m0, m1, e)


def clip_residual(rw, floor=R_RESIDUAL_FLOOR):
    """Push ``w - e`` away from zero, keeping its sign (zero maps to +floor)."""
    rw = np.asarray(rw, dtype=np.float64)
    sign = np.where(rw < 0.0, -1.0, 1.0)
    return np.where(np.abs(rw) < floor, sign * floor, rw)


def dr_pseudo_outcome(w, y, mu0, mu1, e):
    w = np.asarray(w, dtype=np.float64)
    return mu1 - mu0 + w * (y - mu1) / e - (1.0 - w) * (y - mu0) / (1.0 - e)


def content_folds(data: ObservedDataset, k: int, seed: int) -> FoldAssignment:
    """K-fold partition keyed on sorted row content instead of row position."""
    keys = [data.y, data.w] + [data.x[:, j] for j in range(data.d - 1, -1, -1)]
    order = np.lexsort(keys)
    base = kfold_partition(data.n, k, seed)
    fold_of = np.empty(data.n, dtype=np.int64)
    fold_of[order] = base.fold_of
    return FoldAssignment(fold_of=fold_of, k=k)


def _sub_cfg(cfg: BaseLearnerConfig, kind, role) -> BaseLearnerConfig:
    return cfg.with_seed(derive_seed(cfg.seed, kind.value, role))


def _fit_group(data, group, cfg, idx=None):
    if idx is None:
        idx = np.arange(data.n)
    rows = idx[data.w[idx] == group]
    return fit_regressor(data.x[rows], data.y[rows], None, cfg)


def _propensity_model(data, estimate, known, cfg, idx=None, clip=DEFAULT_CLIP):
    if not estimate:
        return ConstantPropensity(known)
    if idx is None:
        idx = np.arange(data.n)
    model = fit_propensity(data.x[idx], data.w[idx], cfg, clip)
    p = model.predict(data.x[idx])
    if np.all((p <= clip) | (p >= 1.0 - clip)):
        raise DiagnosticError(
            "estimated propensities are all at the clipping bound; overlap fails"
        )
    return model


def _parse_propensity(propensity: Propensity, data):
    if isinstance(propensity, str):
        if propensity.strip().lower() != "estimate":
            raise ConfigurationError(
                f"propensity must be a probability or 'estimate', got {propensity!r}"
            )
        data.require_both_groups("propensity estimation")
        return True, None
    p = float(propensity)
    if not 0.0 < p < 1.0:
        raise ConfigurationError(f"known propensity must lie in (0, 1), got {p}")
    return False, p


def _cross_fit_folds(data, cfg, kind):
    folds = content_folds(data, CROSS_FIT_FOLDS, derive_seed(cfg.seed, kind.value, "folds"))
    for j in range(folds.k):
        comp = folds.complement(j)
        wj = data.w[comp]
        if wj.min() == wj.max():
            raise FoldError(
                f"cross-fitting fold {j}: its complement lacks a treatment group", fold=j
            )
    return folds


def fit_cate(kind, data: ObservedDataset, base_cfg: BaseLearnerConfig = BaseLearnerConfig(),
             propensity: Propensity = "estimate") -> CateModel:
    """Fit one of the five meta-learners on ``data``.

    ``propensity`` is either a known assignment probability (randomized design)
    or ``"estimate"``. Sub-model seeds are derived from ``base_cfg.seed`` and a
    role tag.
    """
    kind = AlgorithmKind.parse(kind)
    base_cfg.validate()
    data.require_both_groups(f"fitting the {kind.value} learner")
    estimate, known = _parse_propensity(propensity, data)
    sub = lambda role: _sub_cfg(base_cfg, kind, role)  # noqa: E731
    d = data.d

    if kind is AlgorithmKind.SINGLE:
        xw = np.column_stack([data.x, data.w.astype(np.float64)])
        return SingleModel(d, fit_regressor(xw, data.y, None, sub("outcome")))

    if kind is AlgorithmKind.TWO:
        return TwoModel(d, _fit_group(data, 0, sub("mu0")), _fit_group(data, 1, sub("mu1")))

    if kind is AlgorithmKind.X:
        mu0 = _fit_group(data, 0, sub("mu0"))
        mu1 = _fit_group(data, 1, sub("mu1"))
        t = data.w == 1
        c = ~t
        d1 = data.y[t] - mu0.predict(data.x[t])
        d0 = mu1.predict(data.x[c]) - data.y[c]
        tau1 = fit_regressor(data.x[t], d1, None, sub("tau1"))
        tau0 = fit_regressor(data.x[c], d0, None, sub("tau0"))
        e = _propensity_model(data, estimate, known, sub("propensity"))
        return XLearner(d, mu0, mu1, tau0, tau1, e)

    folds = _cross_fit_folds(data, base_cfg, kind)
    if kind is AlgorithmKind.R:
        m_models, e_models = [], []
        for j in range(folds.k):
            comp = folds.complement(j)
            m_models.append(fit_regressor(data.x[comp], data.y[comp], None, sub(f"m{j}")))
            e_models.append(_propensity_model(data, estimate, known, sub(f"e{j}"), comp))
        model = RLearner(d, folds, None, m_models, e_models)
        ry, rw = model.residuals(data)
        model.final_model = fit_regressor(data.x, ry / rw, rw * rw, sub("final"))
        return model

    if kind is AlgorithmKind.DR:
        m0s, m1s, es = [], [], []
        for j in range(folds.k):
            comp = folds.complement(j)
            m0s.append(_fit_group(data, 0, sub(f"mu0_{j}"), comp))
            m1s.append(_fit_group(data, 1, sub(f"mu1_{j}"), comp))
            es.append(_propensity_model(data, estimate, known, sub(f"e{j}"), comp))
        model = DRLearner(d, folds, None, m0s, m1s, es)
        target = model.learning_target(data)
        model.final_model = fit_regressor(data.x, target, None, sub("final"))
        return model

    raise ConfigurationError(f"unsupported algorithm {kind}")  # pragma: no cover


def predict_cate(model: CateModel, x) -> np.ndarray:
    return model.predict_cate(x)


def learning_target(model: CateModel, data: ObservedDataset) -> Optional[np.ndarray]:
    """Per-row effect-scale learning target, ``None`` for single/two."""
    return model.learning_target(data)
