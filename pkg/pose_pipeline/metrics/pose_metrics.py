from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from pose_pipeline.constants import BODY_PART_ORDER, PLURAL_PART_NAMES, SIDE_PREFIXES
from pose_pipeline.errors import DimensionMismatchError, InputError
from pose_pipeline.skeleton import SkeletonModel

CM_PER_METER = 100.0


@dataclass(frozen=True)
class EvalPair:
    """Predicted and ground-truth 3D pose of one sample, in meters."""

    predicted: np.ndarray
    ground_truth: np.ndarray
    gt_valid: Optional[np.ndarray] = None

    def __post_init__(self):
        predicted = np.asarray(self.predicted, dtype=np.float64)
        ground_truth = np.asarray(self.ground_truth, dtype=np.float64)
        if predicted.ndim != 2 or predicted.shape[1] != 3 or predicted.shape != ground_truth.shape:
            raise DimensionMismatchError(
                f"Prediction {predicted.shape} and ground truth {ground_truth.shape} must both be (J, 3)"
            )
        valid = (
            np.ones(len(ground_truth), dtype=bool)
            if self.gt_valid is None
            else np.asarray(self.gt_valid, dtype=bool)
        )
        if valid.shape != (len(ground_truth),):
            raise DimensionMismatchError(f"gt_valid must have {len(ground_truth)} flags")
        # non-finite ground truth never counts
        valid = valid & np.all(np.isfinite(ground_truth), axis=1)
        object.__setattr__(self, "predicted", predicted)
        object.__setattr__(self, "ground_truth", ground_truth)
        object.__setattr__(self, "gt_valid", valid)

    @property
    def num_landmarks(self) -> int:
        return self.ground_truth.shape[0]


@dataclass
class JointScores:
    """Per-joint values plus their mean over joints that have valid data."""

    per_joint: np.ndarray
    mean: float
    valid_counts: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    def to_dict(self, landmarks: Sequence[str]) -> Dict[str, float]:
        return {name: float(value) for name, value in zip(landmarks, self.per_joint)}


def _errors(pairs: Sequence[EvalPair]) -> np.ndarray:
    """``(N, J)`` Euclidean errors in meters, NaN where ground truth is invalid."""
    if not pairs:
        raise InputError("No evaluation pairs")
    J = pairs[0].num_landmarks
    if any(p.num_landmarks != J for p in pairs):
        raise DimensionMismatchError("Evaluation pairs have differing landmark counts")
    predicted = np.stack([p.predicted for p in pairs])
    ground_truth = np.stack([p.ground_truth for p in pairs])
    valid = np.stack([p.gt_valid for p in pairs])
    errors = np.linalg.norm(np.where(valid[..., None], predicted - ground_truth, 0.0), axis=-1)
    return np.where(valid, errors, np.nan)


def _reduce(values: np.ndarray) -> JointScores:
    counts = np.sum(~np.isnan(values), axis=0)
    sums = np.nansum(values, axis=0)
    per_joint = np.full(values.shape[1], np.nan)
    np.divide(sums, counts, out=per_joint, where=counts > 0)
    if not np.any(counts > 0):
        raise InputError("No joint has valid ground truth")
    return JointScores(
        per_joint=per_joint,
        mean=float(np.nanmean(per_joint)),
        valid_counts=counts,
    )


def ap_at_threshold(pairs: Sequence[EvalPair], threshold: float = 0.10) -> JointScores:
    """Fraction of valid predictions strictly closer than ``threshold`` meters."""
    if threshold <= 0:
        raise InputError(f"AP threshold must be positive, got {threshold}")
    errors = _errors(pairs)
    hits = np.where(np.isnan(errors), np.nan, (errors < threshold).astype(np.float64))
    return _reduce(hits)


def mpjpe(pairs: Sequence[EvalPair]) -> JointScores:
    """Mean per-joint position error in centimeters."""
    return _reduce(_errors(pairs) * CM_PER_METER)


def per_axis_error(pairs: Sequence[EvalPair]) -> np.ndarray:
    """Mean absolute error along camera x, y and z, in centimeters."""
    if not pairs:
        raise InputError("No evaluation pairs")
    deltas = [np.abs(p.predicted - p.ground_truth)[p.gt_valid] for p in pairs]
    stacked = np.concatenate(deltas, axis=0)
    if len(stacked) == 0:
        raise InputError("No joint has valid ground truth")
    return stacked.mean(axis=0) * CM_PER_METER


def body_part_name(landmark: str) -> str:
    for prefix in SIDE_PREFIXES:
        if landmark.startswith(prefix):
            base = landmark[len(prefix) :]
            return PLURAL_PART_NAMES.get(base, base.capitalize() + "s")
    return landmark.capitalize()


def body_part_table(per_joint: np.ndarray, model: SkeletonModel) -> Dict[str, float]:
    """Group per-joint values into body-part rows, averaging left and right.

    Rows follow the usual report order; parts outside it are appended in
    landmark order. ``Mean`` is taken over joints, not over rows.
    """
    values = np.asarray(per_joint, dtype=np.float64)
    if values.shape != (model.num_landmarks,):
        raise DimensionMismatchError(
            f"Expected {model.num_landmarks} per-joint values, got {values.shape}"
        )
    groups: Dict[str, List[float]] = {}
    for name, value in zip(model.landmarks, values):
        groups.setdefault(body_part_name(name), []).append(value)

    order = [part for part in BODY_PART_ORDER if part in groups]
    order += [part for part in groups if part not in order]
    table = {part: float(np.nanmean(groups[part])) for part in order}
    table["Mean"] = float(np.nanmean(values))
    return table
