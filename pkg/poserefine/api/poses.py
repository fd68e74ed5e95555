from typing import List, Optional, Tuple

import numpy as np
from fastapi import APIRouter, Depends

from pose_pipeline.errors import DimensionMismatchError, UnprocessablePoseError
from pose_pipeline.lifting import LandmarkDepths, LiftedPose, Pose2D
from pose_pipeline.pipeline import PosePipeline
from poserefine.api.dependencies import get_pipeline, get_refining_pipeline
from poserefine.config.logger import logger
from poserefine.models.schemas import (
    LandmarkOut,
    PersonIn,
    PersonPoseOut,
    PoseRequest,
    PoseResponse,
    PoseStatus,
)

router = APIRouter()


def _person_inputs(person: PersonIn, num_landmarks: int) -> Tuple[Pose2D, LandmarkDepths]:
    if len(person.landmarks) != num_landmarks:
        raise DimensionMismatchError(
            f"Person {person.person_id or ''} has {len(person.landmarks)} landmarks, "
            f"skeleton has {num_landmarks}"
        )
    marks = person.landmarks
    pose2d = Pose2D(
        u=np.array([m.u for m in marks]),
        v=np.array([m.v for m in marks]),
        confidence=np.array([m.confidence for m in marks]),
        detected=np.array([m.detected for m in marks], dtype=bool),
    )
    depths = LandmarkDepths(np.array([np.nan if m.depth is None else m.depth for m in marks]))
    return pose2d, depths


def _lift_people(
    pipeline: PosePipeline, body: PoseRequest
) -> List[Tuple[PersonPoseOut, Optional[LiftedPose]]]:
    names = pipeline.skeleton.landmarks
    people: List[Tuple[PersonPoseOut, Optional[LiftedPose]]] = []
    for person in body.people:
        pose2d, depths = _person_inputs(person, pipeline.skeleton.num_landmarks)
        try:
            lifted = pipeline.lift(pose2d, depths, body.intrinsics)
        except UnprocessablePoseError as e:
            out = PersonPoseOut(
                person_id=person.person_id,
                status=PoseStatus.UNPROCESSABLE,
                detail=str(e),
            )
            people.append((out, None))
            continue
        out = PersonPoseOut(
            person_id=person.person_id,
            status=PoseStatus.OK,
            lifted=_landmarks_out(names, lifted),
        )
        people.append((out, lifted))
    return people


def _landmarks_out(names, lifted: LiftedPose) -> List[LandmarkOut]:
    return [
        LandmarkOut(
            name=name,
            position=tuple(float(c) for c in position),
            provenance=provenance,
            confidence=float(confidence),
        )
        for name, position, provenance, confidence in zip(
            names, lifted.positions, lifted.provenance, lifted.confidence
        )
    ]


@router.post("/lift", response_model=PoseResponse)
def lift(body: PoseRequest, pipeline: PosePipeline = Depends(get_pipeline)):
    """
    Lift each person's 2D detections to a rough 3D pose.

    - Undetected landmarks are recovered from the limb prior
    - People without a detected trunk are returned as unprocessable
    """
    people = [out for out, _ in _lift_people(pipeline, body)]
    return PoseResponse(skeleton=pipeline.skeleton.name, people=people)


@router.post("/predict", response_model=PoseResponse)
def predict(body: PoseRequest, pipeline: PosePipeline = Depends(get_refining_pipeline)):
    """Lift, then refine every processable person with the regressor."""
    results = _lift_people(pipeline, body)
    ok = [(out, lifted) for out, lifted in results if lifted is not None]
    if ok:
        refined = pipeline.refine([lifted for _, lifted in ok])
        for (out, _), pose in zip(ok, refined):
            out.refined = [tuple(float(c) for c in joint) for joint in pose]
    logger.info(f"Refined {len(ok)} of {len(results)} people")
    return PoseResponse(skeleton=pipeline.skeleton.name, people=[out for out, _ in results])
