"""Gradient-boosted regression trees with squared-error and logistic loss.

Trees are grown leaf-wise (best-gain leaf first) up to ``num_leaves`` leaves,
using exact greedy split search over sorted feature values. Rows are bagged at
rate ``subsample``, with a fresh bag drawn every ``subsample_freq`` trees
(``subsample_freq=0`` disables bagging).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace
from typing import Optional

import numpy as np

from catekit._seeding import make_rng
from catekit.base_learners import _tree
from catekit.dataset import as_covariates
from catekit.errors import ConfigurationError, DataError

DEFAULT_CLIP = 0.01
# minimum summed hessian per child for the logistic loss
_LOGISTIC_MIN_HESS = 1e-3


@dataclass(frozen=True)
class BaseLearnerConfig:
    n_estimators: int = 100
    num_leaves: int = 31
    learning_rate: float = 0.1
    subsample: float = 1.0
    subsample_freq: int = 0
    min_samples_leaf: int = 20
    seed: int = 0

    def validate(self):
        if int(self.n_estimators) != self.n_estimators or self.n_estimators < 0:
            raise ConfigurationError(f"n_estimators must be a count, got {self.n_estimators}")
        if int(self.num_leaves) != self.num_leaves or self.num_leaves < 2:
            raise ConfigurationError(f"num_leaves must be >= 2, got {self.num_leaves}")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ConfigurationError(f"learning_rate must lie in (0, 1], got {self.learning_rate}")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigurationError(f"subsample must lie in (0, 1], got {self.subsample}")
        if int(self.subsample_freq) != self.subsample_freq or self.subsample_freq < 0:
            raise ConfigurationError(f"subsample_freq must be a count, got {self.subsample_freq}")
        if int(self.min_samples_leaf) != self.min_samples_leaf or self.min_samples_leaf < 1:
            raise ConfigurationError(f"min_samples_leaf must be >= 1, got {self.min_samples_leaf}")
        return self

    def with_seed(self, seed: int) -> "BaseLearnerConfig":
        return replace(self, seed=int(seed))

    def to_dict(self):
        return asdict(self)


class RegressionModel:
    """A fitted additive tree ensemble. Immutable once built."""

    def __init__(self, n_features, base_score, learning_rate, trees, config=None):
        self.n_features = int(n_features)
        self.base_score = float(base_score)
        self.learning_rate = float(learning_rate)
        self.config = config
        sizes = [len(t[0]) for t in trees]
        self._offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
        cat = lambda j, dt: (  # noqa: E731
            np.concatenate([t[j] for t in trees]).astype(dt)
            if trees
            else np.zeros(0, dt)
        )
        self._feature = cat(0, np.int64)
        self._threshold = cat(1, np.float64)
        self._left = cat(2, np.int64)
        self._right = cat(3, np.int64)
        self._value = cat(4, np.float64)
        for a in (self._offsets, self._feature, self._threshold, self._left, self._right, self._value):
            a.setflags(write=False)

    @property
    def n_trees(self) -> int:
        return len(self._offsets) - 1

    def tree(self, t):
        """Return tree ``t`` as (feature, threshold, left, right, value)."""
        a, b = self._offsets[t], self._offsets[t + 1]
        return (
            self._feature[a:b],
            self._threshold[a:b],
            self._left[a:b],
            self._right[a:b],
            self._value[a:b],
        )

    def raw_predict(self, x) -> np.ndarray:
        x = as_covariates(x)
        if x.shape[1] != self.n_features:
            raise DataError(
                f"model was trained on {self.n_features} features, got {x.shape[1]}"
            )
        return _tree.predict_forest(
            np.ascontiguousarray(x),
            self._offsets,
            self._feature,
            self._threshold,
            self._left,
            self._right,
            self._value,
            self.learning_rate,
            self.base_score,
        )

    def predict(self, x) -> np.ndarray:
        return self.raw_predict(x)


class PropensityModel:
    """Boosted logistic model whose probabilities are clipped to
    ``[clip_bound, 1 - clip_bound]``."""

    def __init__(self, logit_model: RegressionModel, clip_bound=DEFAULT_CLIP):
        if not 0.0 < clip_bound < 0.5:
            raise ConfigurationError(f"clip_bound must lie in (0, 0.5), got {clip_bound}")
        self.logit_model = logit_model
        self.clip_bound = float(clip_bound)

    @property
    def n_features(self):
        return self.logit_model.n_features

    def predict_unclipped(self, x) -> np.ndarray:
        z = self.logit_model.raw_predict(x)
        return 1.0 / (1.0 + np.exp(-z))

    def predict(self, x) -> np.ndarray:
        return np.clip(self.predict_unclipped(x), self.clip_bound, 1.0 - self.clip_bound)


class ConstantPropensity:
    """Known assignment probability, as in a randomized design."""

    def __init__(self, p: float):
        if not 0.0 < p < 1.0:
            raise ConfigurationError(f"known propensity must lie in (0, 1), got {p}")
        self.p = float(p)

    def predict(self, x) -> np.ndarray:
        return np.full(as_covariates(x).shape[0], self.p)


def _check_inputs(x, targets, weights):
    x = np.ascontiguousarray(as_covariates(x))
    t = np.asarray(targets, dtype=np.float64).ravel()
    if t.size != x.shape[0]:
        raise DataError(f"dimension mismatch: {x.shape[0]} rows but {t.size} targets")
    if not np.all(np.isfinite(t)):
        raise DataError("targets contain non-finite values")
    if weights is None:
        wt = np.ones_like(t)
    else:
        wt = np.asarray(weights, dtype=np.float64).ravel()
        if wt.size != x.shape[0]:
            raise DataError(f"dimension mismatch: {x.shape[0]} rows but {wt.size} weights")
        if not np.all(np.isfinite(wt)) or np.any(wt < 0):
            raise DataError("weights must be finite and nonnegative")
        if not wt.sum() > 0:
            raise DataError("weights are all zero")
    return x, t, wt


def _boost(x, wt, config, base, grad_hess, min_hess):
    config.validate()
    n, d = x.shape
    rng = make_rng(config.seed)
    presorted = np.stack([np.argsort(x[:, f], kind="stable") for f in range(d)])
    bagging = config.subsample < 1.0 and config.subsample_freq > 0
    bag_size = max(1, int(round(config.subsample * n)))

    f_pred = np.full(n, base)
    trees = []
    mask = None
    for t in range(config.n_estimators):
        if bagging and t % config.subsample_freq == 0:
            mask = np.zeros(n, dtype=bool)
            mask[rng.choice(n, size=bag_size, replace=False)] = True
        if bagging:
            sorted_idx = np.ascontiguousarray(
                np.stack([s[mask[s]] for s in presorted])
            )
        else:
            sorted_idx = presorted.copy()
        g, h = grad_hess(f_pred)
        tree = _tree.build_tree(
            x, g * wt, h * wt, sorted_idx,
            int(config.num_leaves), int(config.min_samples_leaf), min_hess,
        )
        trees.append(tree)
        f_pred = f_pred + config.learning_rate * _tree.predict_tree(x, *tree)
    return trees


def fit_regressor(x, targets, weights=None, config: BaseLearnerConfig = BaseLearnerConfig()) -> RegressionModel:
    """Squared-error boosting. With ``n_estimators=0`` the model is the
    weighted mean of ``targets``."""
    x, t, wt = _check_inputs(x, targets, weights)
    base = float(np.sum(wt * t) / np.sum(wt))
    trees = _boost(
        x, wt, config, base,
        lambda f: (f - t, np.ones_like(f)),
        0.0,
    )
    return RegressionModel(x.shape[1], base, config.learning_rate, trees, config)


def fit_classifier(x, labels, weights=None, config: BaseLearnerConfig = BaseLearnerConfig()) -> RegressionModel:
    """Logistic-loss boosting; the returned model predicts logits."""
    x, yb, wt = _check_inputs(x, labels, weights)
    if not np.all((yb == 0) | (yb == 1)):
        raise DataError("classification labels must be 0/1")
    p_bar = float(np.sum(wt * yb) / np.sum(wt))
    if p_bar <= 0.0 or p_bar >= 1.0:
        raise DataError("classification requires both classes to be present")
    base = float(np.log(p_bar / (1.0 - p_bar)))

    def grad_hess(f):
        p = 1.0 / (1.0 + np.exp(-f))
        return p - yb, p * (1.0 - p)

    trees = _boost(x, wt, config, base, grad_hess, _LOGISTIC_MIN_HESS)
    return RegressionModel(x.shape[1], base, config.learning_rate, trees, config)


def fit_propensity(x, w, config: BaseLearnerConfig = BaseLearnerConfig(),
                   clip_bound: float = DEFAULT_CLIP) -> PropensityModel:
    w = np.asarray(w).ravel()
    if np.all(w == w[0]):
        raise DataError("propensity fitting requires both treatment groups")
    return PropensityModel(fit_classifier(x, w, None, config), clip_bound)


def predict(model, x) -> np.ndarray:
    """Predictions of any fitted base learner (regression values or clipped
    probabilities)."""
    return model.predict(x)
