"""Consistent labeling across group assignments (CLAGA).

1. Partition the training rows into ``k`` folds.
2. For each fold ``j`` fit a primary CATE estimator on every other fold.
3. Relabel each row with the prediction of the primary that never saw it.
4. Fit a secondary regressor on ``(x, relabel)``.

A row's new label is a function of its covariates and of the primary fitted
without it, so it cannot read the row's own assignment.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from catekit._seeding import derive_seed
from catekit.base_learners import BaseLearnerConfig, fit_regressor
from catekit.dataset import FoldAssignment, ObservedDataset, kfold_partition
from catekit.errors import ConfigurationError, DataError, FoldError
from catekit.meta_learners import AlgorithmKind, CateModel, Propensity, fit_cate


@dataclass(frozen=True)
class ClagaConfig:
    k: int = 2
    primary_kind: Union[AlgorithmKind, str] = AlgorithmKind.TWO
    primary_cfg: BaseLearnerConfig = field(default_factory=BaseLearnerConfig)
    secondary_cfg: BaseLearnerConfig = field(default_factory=BaseLearnerConfig)
    seed: int = 0
    primary_replicates: int = 1
    stratified: bool = False
    propensity: Propensity = "estimate"

    def validate(self):
        if int(self.k) != self.k or self.k < 2:
            raise ConfigurationError(f"k must be an integer >= 2, got {self.k}")
        if int(self.primary_replicates) != self.primary_replicates or self.primary_replicates < 1:
            raise ConfigurationError(
                f"primary_replicates must be >= 1, got {self.primary_replicates}"
            )
        AlgorithmKind.parse(self.primary_kind)
        self.primary_cfg.validate()
        self.secondary_cfg.validate()
        return self

    def with_seed(self, seed: int) -> "ClagaConfig":
        return replace(self, seed=int(seed))


@dataclass(frozen=True)
class RelabeledDataset:
    x: np.ndarray
    labels: np.ndarray

    @property
    def n(self):
        return len(self.labels)


class ClagaModel(CateModel):
    """Secondary regressor plus the primaries and folds that produced its labels."""

    def __init__(self, n_features, kind, folds, primaries, relabeled, secondary):
        super().__init__(n_features)
        self.kind = kind
        self.folds = folds
        self.primaries = primaries
        self.relabeled = relabeled
        self.secondary = secondary

    def predict_cate(self, x):
        return self.secondary.predict(self._check(x))

    def learning_target(self, data):
        """The out-of-fold relabels; ``data`` must be the training rows."""
        return relabel(data, self.folds, self.primaries).labels


def _as_ensemble(p):
    if hasattr(p, "predict_cate"):
        return [p]
    return list(p)


def relabel(data: ObservedDataset, folds: FoldAssignment,
            primaries: Sequence[Union[CateModel, Sequence[CateModel]]]) -> RelabeledDataset:
    """Label row ``i`` with ``primaries[fold_of[i]]``'s prediction at ``x_i``.

    An entry of ``primaries`` may be a list of replicate models, whose
    predictions are averaged. Only ``data.x`` is read.
    """
    if len(primaries) != folds.k:
        raise DataError(f"expected {folds.k} primary models, got {len(primaries)}")
    if len(folds.fold_of) != data.n:
        raise DataError(
            f"fold assignment covers {len(folds.fold_of)} rows, data has {data.n}"
        )
    labels = np.empty(data.n)
    for j in range(folds.k):
        idx = folds.members(j)
        if idx.size == 0:
            continue
        ens = _as_ensemble(primaries[j])
        preds = [m.predict_cate(data.x[idx]) for m in ens]
        labels[idx] = preds[0] if len(preds) == 1 else np.mean(preds, axis=0)
    if not np.all(np.isfinite(labels)):
        raise DataError("relabeling produced non-finite labels")
    labels.setflags(write=False)
    return RelabeledDataset(x=data.x, labels=labels)


def check_fold_groups(data: ObservedDataset, folds: FoldAssignment):
    for j in range(folds.k):
        w = data.w[folds.complement(j)]
        if w.size == 0 or w.min() == w.max():
            raise FoldError(
                f"fold {j}: training complement lacks a treatment group "
                f"({int(w.sum())} treated of {w.size} rows)",
                fold=j,
            )


def fit_primaries(data: ObservedDataset, folds: FoldAssignment, cfg: ClagaConfig):
    """Fit ``cfg.primary_replicates`` primaries on each fold complement."""
    kind = AlgorithmKind.parse(cfg.primary_kind)
    check_fold_groups(data, folds)
    primaries = []
    for j in range(folds.k):
        sub = data.subset(folds.complement(j))
        reps = [
            fit_cate(
                kind,
                sub,
                cfg.primary_cfg.with_seed(derive_seed(cfg.seed, "primary", j, r)),
                cfg.propensity,
            )
            for r in range(cfg.primary_replicates)
        ]
        primaries.append(reps)
    return primaries


def claga_fit(data: ObservedDataset, cfg: ClagaConfig = ClagaConfig()) -> ClagaModel:
    cfg.validate()
    if cfg.k > data.n:
        raise ConfigurationError(f"k={cfg.k} exceeds the number of rows n={data.n}")
    strata = data.w if cfg.stratified else None
    folds = kfold_partition(data.n, cfg.k, derive_seed(cfg.seed, "folds"), strata=strata)
    primaries = fit_primaries(data, folds, cfg)
    relabeled = relabel(data, folds, primaries)
    secondary = fit_regressor(
        data.x,
        relabeled.labels,
        None,
        cfg.secondary_cfg.with_seed(derive_seed(cfg.seed, "secondary")),
    )
    return ClagaModel(
        data.d, AlgorithmKind.parse(cfg.primary_kind), folds, primaries, relabeled, secondary
    )
