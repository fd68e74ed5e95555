from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, Field, model_validator

from pose_pipeline.lifting import (
    CameraIntrinsics,
    DepthFrame,
    LandmarkDepths,
    Pose2D,
    read_depth_frame,
)
from pose_pipeline.metrics import EvalPair, Pck2DPair

Point3 = Tuple[float, float, float]
Point2 = Tuple[float, float]


class Detection2D(BaseModel):
    u: float
    v: float
    confidence: float = Field(default=1.0, ge=0.0, le=1.0)
    detected: bool = True


class SampleRecord(BaseModel):
    """One person in one frame: detections, depth and optional ground truth.

    Depth is either inline (``depths``, meters, ``None`` = invalid) or a
    ``depth_frame`` sidecar path relative to the dataset file. Ground-truth
    joints set to ``None`` are invalid and excluded from every metric.
    """

    sample_id: str
    intrinsics: CameraIntrinsics
    detections: List[Detection2D]
    depths: Optional[List[Optional[float]]] = None
    depth_frame: Optional[str] = None
    ground_truth: Optional[List[Optional[Point3]]] = None
    gt_2d: Optional[List[Optional[Point2]]] = None
    bbox_height: Optional[float] = Field(default=None, gt=0)

    @model_validator(mode="after")
    def check_consistency(self) -> "SampleRecord":
        J = len(self.detections)
        if (self.depths is None) == (self.depth_frame is None):
            raise ValueError("exactly one of 'depths' or 'depth_frame' is required")
        for name in ("depths", "ground_truth", "gt_2d"):
            values = getattr(self, name)
            if values is not None and len(values) != J:
                raise ValueError(f"'{name}' has {len(values)} entries, detections have {J}")
        if self.ground_truth is not None:
            for point in self.ground_truth:
                if point is not None and not np.all(np.isfinite(point)):
                    raise ValueError("valid ground-truth joints must be finite")
        if self.gt_2d is not None and self.bbox_height is None:
            raise ValueError("'bbox_height' is required with 'gt_2d'")
        return self

    @property
    def num_landmarks(self) -> int:
        return len(self.detections)

    @property
    def has_ground_truth(self) -> bool:
        return self.ground_truth is not None

    def pose2d(self) -> Pose2D:
        return Pose2D(
            u=np.array([d.u for d in self.detections]),
            v=np.array([d.v for d in self.detections]),
            confidence=np.array([d.confidence for d in self.detections]),
            detected=np.array([d.detected for d in self.detections], dtype=bool),
        )

    def depth_source(self, base_dir: Union[str, Path] = ".") -> Union[LandmarkDepths, DepthFrame]:
        if self.depths is not None:
            return LandmarkDepths(
                np.array([np.nan if d is None else d for d in self.depths], dtype=np.float64)
            )
        return read_depth_frame(Path(base_dir) / self.depth_frame, self.intrinsics)

    def ground_truth_array(self) -> np.ndarray:
        """``(J, 3)`` ground truth with NaN rows for invalid joints."""
        return np.array(
            [[np.nan] * 3 if p is None else p for p in self.ground_truth], dtype=np.float64
        )

    def gt_valid(self) -> np.ndarray:
        return np.array([p is not None for p in self.ground_truth], dtype=bool)

    def eval_pair(self, predicted: np.ndarray) -> EvalPair:
        return EvalPair(predicted, self.ground_truth_array(), self.gt_valid())

    def pck_pair(self) -> Optional[Pck2DPair]:
        if self.gt_2d is None:
            return None
        detections = np.array(
            [[d.u, d.v] if d.detected else [np.nan, np.nan] for d in self.detections]
        )
        gt = np.array([[np.nan] * 2 if p is None else p for p in self.gt_2d], dtype=np.float64)
        return Pck2DPair(detections, gt, self.bbox_height)
