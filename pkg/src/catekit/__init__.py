"""Heterogeneous treatment effect estimation with consistent relabeling.

Five meta-learners over an in-house gradient-boosted tree learner, the CLAGA
K-fold relabeling wrapper, the discrepancy-ratio diagnostic and an empirical
five-term error decomposition.
"""

from catekit.base_learners import BaseLearnerConfig, fit_propensity, fit_regressor
from catekit.claga import ClagaConfig, claga_fit, relabel
from catekit.dataset import (
    DGPConfig,
    ObservedDataset,
    SyntheticDataset,
    generate_synthetic,
    kfold_partition,
    load_csv,
    randomize_assignment,
)
from catekit.decomposition import RunRecordSet, decompose, mixture_variance, verify_identity
from catekit.meta_learners import AlgorithmKind, fit_cate, learning_target, predict_cate
from catekit.metrics import discrepancy_ratio, pehe, uplift_auuc, welch_t_test

__version__ = "0.1.0"

__all__ = [
    "AlgorithmKind",
    "BaseLearnerConfig",
    "ClagaConfig",
    "DGPConfig",
    "ObservedDataset",
    "RunRecordSet",
    "SyntheticDataset",
    "claga_fit",
    "decompose",
    "discrepancy_ratio",
    "fit_cate",
    "fit_propensity",
    "fit_regressor",
    "generate_synthetic",
    "kfold_partition",
    "learning_target",
    "load_csv",
    "mixture_variance",
    "pehe",
    "predict_cate",
    "randomize_assignment",
    "relabel",
    "uplift_auuc",
    "verify_identity",
    "welch_t_test",
]
