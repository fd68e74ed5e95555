from typing import Optional

from fastapi import HTTPException, Request, status

from pose_pipeline.pipeline import PosePipeline


def get_pipeline(request: Request) -> PosePipeline:
    """The pipeline loaded at startup"""
    pipeline: Optional[PosePipeline] = getattr(request.app.state, "pipeline", None)
    if pipeline is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="Pose pipeline is not loaded",
        )
    return pipeline


def get_refining_pipeline(request: Request) -> PosePipeline:
    """The pipeline, required to carry a trained regressor"""
    pipeline = get_pipeline(request)
    if pipeline.regressor is None:
        raise HTTPException(
            status_code=status.HTTP_503_SERVICE_UNAVAILABLE,
            detail="No regressor model is loaded",
        )
    return pipeline
