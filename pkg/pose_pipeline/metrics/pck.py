from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from pose_pipeline.constants import DEFAULT_PCK_FRACTIONS
from pose_pipeline.errors import DimensionMismatchError, InputError


@dataclass(frozen=True)
class Pck2DPair:
    """2D detections of one person against ground truth, in pixels.

    Absent detections and invalid ground-truth landmarks are NaN rows.
    """

    detections: np.ndarray
    ground_truth_2d: np.ndarray
    bbox_height: float

    def __post_init__(self):
        detections = np.asarray(self.detections, dtype=np.float64)
        ground_truth = np.asarray(self.ground_truth_2d, dtype=np.float64)
        if detections.ndim != 2 or detections.shape[1] != 2 or detections.shape != ground_truth.shape:
            raise DimensionMismatchError(
                f"Detections {detections.shape} and ground truth {ground_truth.shape} must both be (J, 2)"
            )
        if not np.isfinite(self.bbox_height) or self.bbox_height <= 0:
            raise InputError(f"bbox_height must be positive, got {self.bbox_height}")
        object.__setattr__(self, "detections", detections)
        object.__setattr__(self, "ground_truth_2d", ground_truth)

    @property
    def detected(self) -> np.ndarray:
        return np.all(np.isfinite(self.detections), axis=1)

    @property
    def gt_valid(self) -> np.ndarray:
        return np.all(np.isfinite(self.ground_truth_2d), axis=1)


@dataclass
class PckCurve:
    fractions: np.ndarray
    true_positives: np.ndarray
    false_positives: np.ndarray
    false_negatives: np.ndarray
    precision: np.ndarray
    recall: np.ndarray
    f_score: np.ndarray
    # TP + FP == 0: precision reported as 0
    precision_undefined: np.ndarray

    @property
    def max_f_score(self) -> float:
        return float(self.f_score.max())

    @property
    def mean_precision(self) -> float:
        return float(self.precision.mean())

    @property
    def mean_recall(self) -> float:
        return float(self.recall.mean())

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "fraction": self.fractions,
                "precision": self.precision,
                "recall": self.recall,
                "f_score": self.f_score,
                "tp": self.true_positives,
                "fp": self.false_positives,
                "fn": self.false_negatives,
                "precision_undefined": self.precision_undefined,
            }
        )


def pck_curve(
    pairs: Sequence[Pck2DPair], radius_fractions: Optional[Sequence[float]] = None
) -> PckCurve:
    """Precision and recall of 2D detections over a sweep of radii.

    The radius is ``fraction * bbox_height``. A detection strictly inside the
    radius of its ground-truth landmark is a true positive; a detection
    outside it is a false positive and leaves its landmark a false negative.
    Undetected valid landmarks are false negatives and detections of invalid
    landmarks are false positives.
    """
    fractions = np.asarray(
        DEFAULT_PCK_FRACTIONS if radius_fractions is None else radius_fractions, dtype=np.float64
    )
    if not pairs:
        raise InputError("No PCK pairs")
    if fractions.ndim != 1 or len(fractions) == 0:
        raise InputError("At least one radius fraction is required")
    if np.any(~np.isfinite(fractions)) or np.any(fractions <= 0):
        raise InputError("Radius fractions must be positive")

    tp = np.zeros(len(fractions), dtype=np.int64)
    fp = np.zeros_like(tp)
    fn = np.zeros_like(tp)
    for pair in pairs:
        detected, valid = pair.detected, pair.gt_valid
        matched = detected & valid
        distances = np.linalg.norm(
            pair.detections[matched] - pair.ground_truth_2d[matched], axis=1
        )
        radii = fractions * pair.bbox_height
        hits = (distances[None, :] < radii[:, None]).sum(axis=1)
        misses = matched.sum() - hits
        tp += hits
        fp += misses + np.sum(detected & ~valid)
        fn += misses + np.sum(~detected & valid)

    predicted = tp + fp
    actual = tp + fn
    undefined = predicted == 0
    precision = np.divide(tp, predicted, out=np.zeros(len(fractions)), where=~undefined)
    recall = np.divide(tp, actual, out=np.zeros(len(fractions)), where=actual > 0)
    denom = precision + recall
    f_score = np.divide(2 * precision * recall, denom, out=np.zeros(len(fractions)), where=denom > 0)
    return PckCurve(
        fractions=fractions,
        true_positives=tp,
        false_positives=fp,
        false_negatives=fn,
        precision=precision,
        recall=recall,
        f_score=f_score,
        precision_undefined=undefined,
    )
