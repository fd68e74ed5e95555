from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from pose_pipeline.errors import DimensionMismatchError, InputError
from pose_pipeline.lifting import LiftedPose
from pose_pipeline.nn import (
    BatchNorm1d,
    Dropout,
    Linear,
    Module,
    ReLU,
    ResidualBlock,
    Sequential,
    check_finite,
)

STD_FLOOR = 1e-8


class RegressorConfig(BaseModel):
    num_landmarks: int = Field(default=15, gt=0)
    features: int = Field(default=1024, gt=0)
    blocks: int = Field(default=3, ge=1)
    dropout_rate: float = Field(default=0.5, ge=0.0, lt=1.0)
    use_confidence: bool = False
    residual: bool = True
    epochs: int = Field(default=200, ge=1)
    batch_size: int = Field(default=128, ge=2)
    lr0: float = Field(default=1e-3, gt=0)
    lr_halving_period: int = Field(default=20, ge=1)
    momentum: float = Field(default=0.1, gt=0.0, le=1.0)
    smooth_l1_beta: float = Field(default=1.0, gt=0)
    zero_init_output: bool = True
    validate_every: int = Field(default=1, ge=1)
    seed: int = 0

    @property
    def channels(self) -> int:
        return 4 if self.use_confidence else 3


@dataclass(frozen=True)
class NormalizationStats:
    """Per-coordinate mean/std (length ``J * 3``) of lifted inputs and targets."""

    input_mean: np.ndarray
    input_std: np.ndarray
    target_mean: np.ndarray
    target_std: np.ndarray

    @classmethod
    def from_data(cls, lifted_xyz: np.ndarray, targets: np.ndarray) -> "NormalizationStats":
        n = lifted_xyz.shape[0]
        x = lifted_xyz.reshape(n, -1)
        y = targets.reshape(n, -1)
        return cls(
            input_mean=x.mean(axis=0),
            input_std=np.maximum(x.std(axis=0), STD_FLOOR),
            target_mean=y.mean(axis=0),
            target_std=np.maximum(y.std(axis=0), STD_FLOOR),
        )

    @classmethod
    def identity(cls, num_landmarks: int) -> "NormalizationStats":
        zeros, ones = np.zeros(num_landmarks * 3), np.ones(num_landmarks * 3)
        return cls(zeros, ones, zeros.copy(), ones.copy())

    def normalize_target(self, poses: np.ndarray) -> np.ndarray:
        n = poses.shape[0]
        return ((poses.reshape(n, -1) - self.target_mean) / self.target_std).reshape(poses.shape)

    def denormalize_target(self, normalized: np.ndarray) -> np.ndarray:
        n = normalized.shape[0]
        flat = normalized.reshape(n, -1) * self.target_std + self.target_mean
        return flat.reshape(normalized.shape)


class ResidualPoseNetwork(Module):
    """Fully-connected regressor with a global pose shortcut.

    Input is the flattened normalized lifted pose ``(B, J * C)``; output is
    ``f(x) + shortcut(x)`` in target-normalized units ``(B, J * 3)``. The
    shortcut keeps only the xyz channels and maps them from input to target
    normalization, so a zero output layer reproduces the lifted pose.
    """

    def __init__(self, config: RegressorConfig, rng: np.random.Generator):
        super().__init__()
        J, C, F = config.num_landmarks, config.channels, config.features
        self.num_landmarks = J
        self.channels = C
        self.residual = config.residual
        self.input_block = Sequential(
            Linear(J * C, F, rng),
            BatchNorm1d(F, momentum=config.momentum),
            ReLU(),
            Dropout(config.dropout_rate, rng),
        )
        self.blocks = Sequential(
            *[
                ResidualBlock(F, config.dropout_rate, rng, momentum=config.momentum)
                for _ in range(config.blocks)
            ]
        )
        self.output = Linear(F, J * 3, rng, zero_init=config.zero_init_output)
        self._modules.update(input=self.input_block, blocks=self.blocks, output=self.output)

        self.xyz_index = np.array([j * C + c for j in range(J) for c in range(3)])
        self.shortcut_scale = np.ones(J * 3)
        self.shortcut_offset = np.zeros(J * 3)

    def set_shortcut(self, stats: NormalizationStats) -> None:
        self.shortcut_scale = stats.input_std / stats.target_std
        self.shortcut_offset = (stats.input_mean - stats.target_mean) / stats.target_std

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.num_landmarks * self.channels:
            raise DimensionMismatchError(
                f"Regressor expects (batch, {self.num_landmarks * self.channels}) input, got {x.shape}"
            )
        h = self.input_block.forward(x)
        h = self.blocks.forward(h)
        out = self.output.forward(h)
        if self.residual:
            out = out + self.shortcut_scale * x[:, self.xyz_index] + self.shortcut_offset
        return out

    def backward(self, grad_output: np.ndarray) -> np.ndarray:
        g = self.output.backward(grad_output)
        g = self.blocks.backward(g)
        grad_x = self.input_block.backward(g)
        if self.residual:
            grad_x[:, self.xyz_index] += self.shortcut_scale * grad_output
        return grad_x


class ResidualRegressor:
    """Trained residual-pose regressor together with its normalization."""

    def __init__(
        self,
        config: RegressorConfig,
        stats: NormalizationStats,
        network: Optional[ResidualPoseNetwork] = None,
        skeleton_checksum: str = "",
    ):
        self.config = config
        self.stats = stats
        self.skeleton_checksum = skeleton_checksum
        if network is None:
            network = ResidualPoseNetwork(config, np.random.default_rng(config.seed))
        self.network = network
        self.network.set_shortcut(stats)

    @property
    def num_landmarks(self) -> int:
        return self.config.num_landmarks

    def parameter_count(self) -> int:
        return int(sum(p.value.size for p in self.network.parameters()))

    def encode(self, features: np.ndarray) -> np.ndarray:
        """Normalize ``(B, J, C)`` lifted features into flat network inputs."""
        features = np.asarray(features, dtype=np.float64)
        J, C = self.config.num_landmarks, self.config.channels
        if features.ndim != 3 or features.shape[1:] != (J, C):
            raise DimensionMismatchError(
                f"Expected lifted batch of shape (B, {J}, {C}), got {features.shape}"
            )
        check_finite("lifted input", features)
        n = features.shape[0]
        xyz = (features[..., :3].reshape(n, -1) - self.stats.input_mean) / self.stats.input_std
        if C == 3:
            return xyz
        # confidence channel passes through unnormalized
        encoded = np.empty((n, J, C))
        encoded[..., :3] = xyz.reshape(n, J, 3)
        encoded[..., 3] = features[..., 3]
        return encoded.reshape(n, -1)

    def forward(self, features: np.ndarray, training: bool = False) -> np.ndarray:
        """Refined ``(B, J, 3)`` poses in meters from ``(B, J, C)`` lifted features."""
        self.network.train(training)
        out = self.network.forward(self.encode(features))
        n = out.shape[0]
        poses = self.stats.denormalize_target(out.reshape(n, self.num_landmarks, 3))
        return check_finite("regressor output", poses)

    def predict(self, lifted: Sequence[LiftedPose], batch_size: int = 1024) -> np.ndarray:
        if not lifted:
            raise InputError("Nothing to predict")
        features = stack_features(lifted, self.config.use_confidence)
        chunks = [
            self.forward(features[i : i + batch_size])
            for i in range(0, len(features), batch_size)
        ]
        return np.concatenate(chunks, axis=0)


def stack_features(lifted: Sequence[LiftedPose], use_confidence: bool) -> np.ndarray:
    return np.stack([pose.features(use_confidence) for pose in lifted])
