import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from pose_pipeline.constants import Provenance, RecoveryMode
from pose_pipeline.errors import (
    DimensionMismatchError,
    InputError,
    NumericalError,
    UnprocessablePoseError,
)
from pose_pipeline.lifting.camera import CameraIntrinsics, lift_point
from pose_pipeline.lifting.depth import DepthSource
from pose_pipeline.lifting.limb_prior import LimbPrior, recover_landmark
from pose_pipeline.skeleton import SkeletonModel, recovery_order

logger = logging.getLogger(__name__)


class LiftConfig(BaseModel):
    fill_radius: int = Field(default=5, ge=0)
    recovered_confidence: float = Field(default=0.1, ge=0.0, le=1.0)
    recovery_mode: RecoveryMode = RecoveryMode.PRIOR
    min_extra_trunk: int = Field(default=2, ge=0)


@dataclass(frozen=True)
class Pose2D:
    """Per-landmark 2D detections from a pose CNN (or a surrogate)."""

    u: np.ndarray
    v: np.ndarray
    confidence: np.ndarray
    detected: np.ndarray

    @classmethod
    def from_arrays(cls, uv, confidence=None, detected=None) -> "Pose2D":
        uv = np.asarray(uv, dtype=np.float64)
        n = uv.shape[0]
        confidence = np.ones(n) if confidence is None else np.asarray(confidence, dtype=np.float64)
        detected = np.ones(n, dtype=bool) if detected is None else np.asarray(detected, dtype=bool)
        return cls(u=uv[:, 0], v=uv[:, 1], confidence=confidence, detected=detected)

    @property
    def num_landmarks(self) -> int:
        return len(self.u)


@dataclass(frozen=True)
class LiftedPose:
    positions: np.ndarray  # (J, 3) meters, camera frame
    provenance: Tuple[Provenance, ...]
    confidence: np.ndarray  # (J,)

    @property
    def num_landmarks(self) -> int:
        return self.positions.shape[0]

    def features(self, use_confidence: bool = False) -> np.ndarray:
        """Regressor input: ``(J, 3)`` or confidence-augmented ``(J, 4)``."""
        if not use_confidence:
            return self.positions
        return np.concatenate([self.positions, self.confidence[:, None]], axis=1)


def lift_pose(
    model: SkeletonModel,
    pose2d: Pose2D,
    frame: DepthSource,
    prior: Optional[LimbPrior],
    config: LiftConfig = LiftConfig(),
    intrinsics: Optional[CameraIntrinsics] = None,
) -> LiftedPose:
    """Lift 2D detections to 3D and recover missing landmarks.

    ``intrinsics`` defaults to ``frame.intrinsics`` for depth frames; inline
    per-landmark depths must pass them explicitly.
    """
    J = model.num_landmarks
    if pose2d.num_landmarks != J:
        raise DimensionMismatchError(
            f"2D pose has {pose2d.num_landmarks} landmarks, skeleton has {J}"
        )
    intrinsics = intrinsics or getattr(frame, "intrinsics", None)
    if intrinsics is None:
        raise InputError("Camera intrinsics are required to lift a pose")

    positions = np.full((J, 3), np.nan)
    provenance: List[Optional[Provenance]] = [None] * J
    confidence = np.zeros(J)
    resolved = np.zeros(J, dtype=bool)

    for j in range(J):
        if not pose2d.detected[j]:
            continue
        u, v = float(pose2d.u[j]), float(pose2d.v[j])
        depth, filled = frame.resolve_depth(j, u, v, config.fill_radius)
        if depth is None:
            logger.debug(f"Landmark {model.landmarks[j]} has no usable depth; demoted to undetected")
            continue
        positions[j] = lift_point(u, v, depth, intrinsics)
        provenance[j] = Provenance.DEPTH_FILLED if filled else Provenance.DETECTED
        confidence[j] = pose2d.confidence[j]
        resolved[j] = True

    _check_trunk_guarantee(model, resolved, config.min_extra_trunk)

    if config.recovery_mode == RecoveryMode.TRUNK_CENTROID:
        trunk = sorted(i for i in model.trunk_landmarks if resolved[i])
        centroid = positions[trunk].mean(axis=0)
        for j in np.flatnonzero(~resolved):
            positions[j] = centroid
            provenance[j] = Provenance.CENTROID_FILLED
            confidence[j] = config.recovered_confidence
    else:
        for limb in recovery_order(model)[1:]:
            child, shared = model.limbs[limb]
            if resolved[child]:
                continue
            if prior is None:
                raise InputError("A limb prior is required to recover undetected landmarks")
            parent_child, parent_shared = model.limbs[model.limb_parents[limb]]
            parent_vector = positions[parent_child] - positions[parent_shared]
            positions[child] = positions[shared] + recover_landmark(prior, limb, parent_vector)
            provenance[child] = Provenance.PRIOR_RECOVERED
            confidence[child] = config.recovered_confidence
            resolved[child] = True

    if not np.all(np.isfinite(positions)):
        raise NumericalError("Lifted pose contains non-finite coordinates")
    return LiftedPose(positions=positions, provenance=tuple(provenance), confidence=confidence)


def _check_trunk_guarantee(model: SkeletonModel, resolved: np.ndarray, min_extra: int) -> None:
    root = model.root_landmarks
    missing_root = [model.landmarks[i] for i in root if not resolved[i]]
    if missing_root:
        raise UnprocessablePoseError(
            f"Spine landmarks not detected with valid depth: {', '.join(missing_root)}"
        )
    extra = [i for i in model.trunk_landmarks if i not in root and resolved[i]]
    if len(extra) < min_extra:
        raise UnprocessablePoseError(
            f"Only {len(extra)} trunk landmarks besides the spine were lifted, need {min_extra}"
        )
