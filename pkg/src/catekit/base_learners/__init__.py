from catekit.base_learners.gbm import (
    DEFAULT_CLIP,
    BaseLearnerConfig,
    ConstantPropensity,
    PropensityModel,
    RegressionModel,
    fit_classifier,
    fit_propensity,
    fit_regressor,
    predict,
)

__all__ = [
    "DEFAULT_CLIP",
    "BaseLearnerConfig",
    "ConstantPropensity",
    "PropensityModel",
    "RegressionModel",
    "fit_classifier",
    "fit_propensity",
    "fit_regressor",
    "predict",
]
