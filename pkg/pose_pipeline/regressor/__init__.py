from pose_pipeline.regressor.residual_regressor import (
    NormalizationStats,
    RegressorConfig,
    ResidualPoseNetwork,
    ResidualRegressor,
    stack_features,
)
from pose_pipeline.regressor.serialization import load_model, save_model
from pose_pipeline.regressor.trainer import (
    EpochRecord,
    TrainingReport,
    fit,
    learning_rate,
    minibatches,
)

__all__ = [
    "EpochRecord",
    "NormalizationStats",
    "RegressorConfig",
    "ResidualPoseNetwork",
    "ResidualRegressor",
    "TrainingReport",
    "fit",
    "learning_rate",
    "load_model",
    "minibatches",
    "save_model",
    "stack_features",
]
