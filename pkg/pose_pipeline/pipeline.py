import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from pose_pipeline.data import SampleRecord
from pose_pipeline.errors import ChecksumError, DimensionMismatchError, InputError, UnprocessablePoseError
from pose_pipeline.lifting import (
    CameraIntrinsics,
    DepthSource,
    LiftConfig,
    LiftedPose,
    LimbPrior,
    Pose2D,
    lift_pose,
)
from pose_pipeline.regressor import ResidualRegressor
from pose_pipeline.skeleton import SkeletonModel

logger = logging.getLogger(__name__)


@dataclass
class LiftOutcome:
    sample_id: str
    lifted: Optional[LiftedPose] = None
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.lifted is not None


@dataclass
class Throughput:
    stage: str
    count: int
    seconds: float

    @property
    def per_second(self) -> float:
        return self.count / self.seconds if self.seconds > 0 else float("inf")

    def log(self) -> None:
        logger.info(f"{self.stage}: {self.count} poses in {self.seconds:.3f}s ({self.per_second:.1f} poses/s)")


class PosePipeline:
    """Skeleton, limb prior and regressor wired into lift -> refine."""

    def __init__(
        self,
        skeleton: SkeletonModel,
        prior: Optional[LimbPrior] = None,
        regressor: Optional[ResidualRegressor] = None,
        lift_config: Optional[LiftConfig] = None,
    ):
        if prior is not None and prior.skeleton_checksum != skeleton.checksum:
            raise ChecksumError("Limb prior was fitted for a different skeleton")
        if regressor is not None:
            if regressor.num_landmarks != skeleton.num_landmarks:
                raise DimensionMismatchError(
                    f"Regressor expects {regressor.num_landmarks} landmarks, "
                    f"skeleton has {skeleton.num_landmarks}"
                )
            if regressor.skeleton_checksum and regressor.skeleton_checksum != skeleton.checksum:
                raise ChecksumError("Regressor was trained for a different skeleton")
        self.skeleton = skeleton
        self.prior = prior
        self.regressor = regressor
        self.lift_config = lift_config or LiftConfig()
        self.last_throughput: List[Throughput] = []

    def lift(
        self, pose2d: Pose2D, depth: DepthSource, intrinsics: Optional[CameraIntrinsics] = None
    ) -> LiftedPose:
        return lift_pose(self.skeleton, pose2d, depth, self.prior, self.lift_config, intrinsics)

    def lift_records(
        self, records: Sequence[SampleRecord], base_dir: Union[str, Path] = "."
    ) -> List[LiftOutcome]:
        """Lift every record; trunk-guarantee failures are kept as outcomes."""
        started = time.perf_counter()
        outcomes: List[LiftOutcome] = []
        for record in records:
            try:
                lifted = self.lift(record.pose2d(), record.depth_source(base_dir), record.intrinsics)
                outcomes.append(LiftOutcome(record.sample_id, lifted))
            except UnprocessablePoseError as e:
                logger.warning(f"Sample {record.sample_id} is unprocessable: {e}")
                outcomes.append(LiftOutcome(record.sample_id, error=str(e)))
        throughput = Throughput("lift", len(records), time.perf_counter() - started)
        throughput.log()
        self.last_throughput = [throughput]
        return outcomes

    def refine(self, lifted: Sequence[LiftedPose]) -> np.ndarray:
        if self.regressor is None:
            raise InputError("No regressor model is loaded")
        started = time.perf_counter()
        refined = self.regressor.predict(lifted)
        throughput = Throughput("forward", len(lifted), time.perf_counter() - started)
        throughput.log()
        self.last_throughput.append(throughput)
        return refined


def unprocessable_fraction(outcomes: Sequence[LiftOutcome]) -> float:
    if not outcomes:
        return 0.0
    return sum(not o.ok for o in outcomes) / len(outcomes)


def training_pairs(
    records: Sequence[SampleRecord], outcomes: Sequence[LiftOutcome]
) -> List[Tuple[LiftedPose, np.ndarray]]:
    """(lifted, ground truth) for lifted records whose ground truth is fully valid."""
    pairs = []
    skipped = 0
    for record, outcome in zip(records, outcomes):
        if not outcome.ok:
            continue
        if not record.has_ground_truth or not record.gt_valid().all():
            skipped += 1
            continue
        pairs.append((outcome.lifted, record.ground_truth_array()))
    if skipped:
        logger.warning(f"Skipped {skipped} samples without complete ground truth")
    return pairs
