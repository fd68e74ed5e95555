import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from pose_pipeline.errors import DimensionMismatchError, InputError, NumericalError
from pose_pipeline.lifting import LiftedPose
from pose_pipeline.nn import Adam, smooth_l1
from pose_pipeline.regressor.residual_regressor import (
    NormalizationStats,
    RegressorConfig,
    ResidualPoseNetwork,
    ResidualRegressor,
    stack_features,
)
from pose_pipeline.skeleton import SkeletonModel

logger = logging.getLogger(__name__)

Sample = Tuple[LiftedPose, np.ndarray]


@dataclass
class EpochRecord:
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: Optional[float] = None
    val_mpjpe_cm: Optional[float] = None


@dataclass
class TrainingReport:
    epochs: List[EpochRecord] = field(default_factory=list)
    parameter_count: int = 0
    train_samples: int = 0
    val_samples: int = 0
    elapsed_seconds: float = 0.0

    @property
    def final_loss(self) -> float:
        return self.epochs[-1].train_loss

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def learning_rate(config: RegressorConfig, epoch: int) -> float:
    """``lr0`` halved every ``lr_halving_period`` epochs."""
    return config.lr0 * 0.5 ** (epoch // config.lr_halving_period)


def minibatches(order: np.ndarray, batch_size: int) -> List[np.ndarray]:
    """Split an index permutation; a trailing single row joins the previous batch."""
    batches = [order[i : i + batch_size] for i in range(0, len(order), batch_size)]
    if len(batches) > 1 and len(batches[-1]) == 1:
        batches[-2] = np.concatenate([batches[-2], batches.pop()])
    return batches


def _arrays(
    dataset: Sequence[Sample], config: RegressorConfig
) -> Tuple[np.ndarray, np.ndarray]:
    features = stack_features([lifted for lifted, _ in dataset], config.use_confidence)
    targets = np.stack([np.asarray(gt, dtype=np.float64) for _, gt in dataset])
    J = config.num_landmarks
    if features.shape[1] != J or targets.shape[1:] != (J, 3):
        raise DimensionMismatchError(
            f"Dataset poses do not have {J} landmarks (got {features.shape[1]})"
        )
    if not np.all(np.isfinite(targets)):
        raise InputError("Ground-truth poses contain non-finite coordinates")
    return features, targets


def fit(
    config: RegressorConfig,
    model: SkeletonModel,
    dataset: Sequence[Sample],
    validation: Optional[Sequence[Sample]] = None,
) -> Tuple[ResidualRegressor, TrainingReport]:
    """Train the regressor with Adam and smooth-L1 loss in normalized space."""
    if len(dataset) < 2:
        raise InputError("Training needs at least 2 samples")
    if config.num_landmarks != model.num_landmarks:
        raise DimensionMismatchError(
            f"Config has {config.num_landmarks} landmarks, skeleton has {model.num_landmarks}"
        )

    started = time.perf_counter()
    features, targets = _arrays(dataset, config)
    stats = NormalizationStats.from_data(features[..., :3], targets)

    rng = np.random.default_rng(config.seed)
    network = ResidualPoseNetwork(config, rng)
    regressor = ResidualRegressor(config, stats, network, skeleton_checksum=model.checksum)
    inputs = regressor.encode(features)
    normalized_targets = stats.normalize_target(targets).reshape(len(targets), -1)

    val_arrays = _arrays(validation, config) if validation else None
    optimizer = Adam(network.parameters())
    report = TrainingReport(
        parameter_count=regressor.parameter_count(),
        train_samples=len(dataset),
        val_samples=len(validation or []),
    )
    logger.info(
        f"Training regressor: {len(dataset)} samples, {report.parameter_count} parameters, "
        f"F={config.features}, R={config.blocks}, C={config.channels}"
    )

    for epoch in range(config.epochs):
        lr = learning_rate(config, epoch)
        network.train()
        total = 0.0
        for batch in minibatches(rng.permutation(len(inputs)), config.batch_size):
            network.zero_grad()
            out = network.forward(inputs[batch])
            loss, grad = smooth_l1(out, normalized_targets[batch], config.smooth_l1_beta)
            if not np.isfinite(loss):
                raise NumericalError(
                    f"Training loss became non-finite at epoch {epoch} (lr={lr:g})"
                )
            network.backward(grad)
            optimizer.step(lr)
            total += loss * len(batch)

        record = EpochRecord(epoch=epoch, learning_rate=lr, train_loss=total / len(inputs))
        last_epoch = epoch == config.epochs - 1
        if val_arrays is not None and ((epoch + 1) % config.validate_every == 0 or last_epoch):
            record.val_loss, record.val_mpjpe_cm = _validate(regressor, *val_arrays)
        report.epochs.append(record)
        logger.info(
            f"epoch {epoch:3d} lr={lr:.2e} train_loss={record.train_loss:.6f}"
            + (f" val_loss={record.val_loss:.6f} val_mpjpe={record.val_mpjpe_cm:.2f}cm"
               if record.val_loss is not None else "")
        )

    network.eval()
    report.elapsed_seconds = time.perf_counter() - started
    return regressor, report


def _validate(
    regressor: ResidualRegressor, features: np.ndarray, targets: np.ndarray
) -> Tuple[float, float]:
    predictions = regressor.forward(features, training=False)
    loss, _ = smooth_l1(
        regressor.stats.normalize_target(predictions),
        regressor.stats.normalize_target(targets),
        regressor.config.smooth_l1_beta,
    )
    mpjpe_cm = float(np.linalg.norm(predictions - targets, axis=-1).mean() * 100.0)
    return loss, mpjpe_cm
