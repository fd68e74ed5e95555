from datetime import datetime
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, Field, field_validator

from pose_pipeline.constants import Provenance
from pose_pipeline.lifting import CameraIntrinsics
from pose_pipeline.pipeline import LiftOutcome

# ---------------------------------------------------------------------------
# Pose request / response schemas (API)
# ---------------------------------------------------------------------------


class LandmarkIn(BaseModel):
    """One 2D landmark detection with the depth read at that pixel (meters)."""

    u: float
    v: float
    confidence: float = Field(default=1.0, ge=0.0, le=1.0)
    detected: bool = True
    depth: Optional[float] = None


class PersonIn(BaseModel):
    person_id: Optional[str] = None
    landmarks: List[LandmarkIn] = Field(..., min_length=1)


class PoseRequest(BaseModel):
    intrinsics: CameraIntrinsics
    people: List[PersonIn] = Field(..., min_length=1)


class PoseStatus(str, Enum):
    OK = "ok"
    UNPROCESSABLE = "unprocessable"


class LandmarkOut(BaseModel):
    name: str
    position: Tuple[float, float, float]
    provenance: Provenance
    confidence: float


class PersonPoseOut(BaseModel):
    person_id: Optional[str] = None
    status: PoseStatus
    detail: Optional[str] = None
    lifted: Optional[List[LandmarkOut]] = None
    refined: Optional[List[Tuple[float, float, float]]] = None


class PoseResponse(BaseModel):
    skeleton: str
    people: List[PersonPoseOut]


class HealthResponse(BaseModel):
    status: str
    environment: str
    version: str
    skeleton_loaded: bool
    prior_loaded: bool
    model_loaded: bool


# ---------------------------------------------------------------------------
# Run manifest (CLI)
# ---------------------------------------------------------------------------


class RunManifest(BaseModel):
    """Everything needed to reproduce one CLI run."""

    command: str
    tool_version: str
    seed: int
    config: Dict[str, Any] = Field(default_factory=dict)
    inputs: Dict[str, Optional[str]] = Field(default_factory=dict)
    outputs: Dict[str, str] = Field(default_factory=dict)
    started_at: datetime
    timings: Dict[str, float] = Field(default_factory=dict)
    throughput: Dict[str, float] = Field(default_factory=dict)
    results: Dict[str, Any] = Field(default_factory=dict)
    exit_code: int = 0

    @field_validator("inputs", mode="before")
    @classmethod
    def stringify_paths(cls, v):
        return {k: None if p is None else str(p) for k, p in (v or {}).items()}


class PredictionRecord(BaseModel):
    """One line of a lift/predict output file; ``predicted`` is None when unprocessable."""

    sample_id: str
    status: PoseStatus
    detail: Optional[str] = None
    lifted: Optional[List[Tuple[float, float, float]]] = None
    provenance: Optional[List[Provenance]] = None
    confidence: Optional[List[float]] = None
    predicted: Optional[List[Tuple[float, float, float]]] = None

    @classmethod
    def from_outcome(cls, outcome: "LiftOutcome") -> "PredictionRecord":
        if not outcome.ok:
            return cls(
                sample_id=outcome.sample_id,
                status=PoseStatus.UNPROCESSABLE,
                detail=outcome.error,
            )
        lifted = outcome.lifted
        return cls(
            sample_id=outcome.sample_id,
            status=PoseStatus.OK,
            lifted=lifted.positions.tolist(),
            provenance=list(lifted.provenance),
            confidence=lifted.confidence.tolist(),
        )
