import time
from contextlib import asynccontextmanager
from typing import Optional

from fastapi import FastAPI, Request, status
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from pose_pipeline.errors import InputError, NumericalError, PipelineError
from pose_pipeline.lifting import load_limb_prior
from pose_pipeline.pipeline import PosePipeline
from pose_pipeline.regressor import load_model
from pose_pipeline.skeleton import load_skeleton
from poserefine.api import poses
from poserefine.config.logger import logger
from poserefine.config.settings import settings
from poserefine.models.schemas import HealthResponse


def load_pipeline() -> Optional[PosePipeline]:
    """Build the pipeline from the artifact paths in settings."""
    try:
        skeleton = load_skeleton(settings.skeleton_path)
        prior = load_limb_prior(settings.prior_path, skeleton) if settings.prior_path else None
        regressor = load_model(settings.model_path, skeleton) if settings.model_path else None
        return PosePipeline(skeleton, prior, regressor)
    except (OSError, PipelineError) as e:
        logger.error(f"Could not load pose artifacts: {e}")
        return None


@asynccontextmanager
async def lifespan(app: FastAPI):
    """Handle application lifecycle events"""
    logger.info(f"Starting {settings.app_name} v{settings.app_version}")
    app.state.pipeline = load_pipeline()
    if app.state.pipeline is not None:
        logger.info(
            f"Skeleton '{app.state.pipeline.skeleton.name}' loaded "
            f"(prior: {settings.prior_path or 'none'}, model: {settings.model_path or 'none'})"
        )

    yield

    logger.info("Shutting down application")
    app.state.pipeline = None


app = FastAPI(
    title=settings.app_name,
    version=settings.app_version,
    docs_url="/docs",
    redoc_url="/redoc",
    openapi_url="/openapi.json",
    lifespan=lifespan,
)

app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)


@app.middleware("http")
async def add_process_time_header(request: Request, call_next):
    start_time = time.time()
    response = await call_next(request)
    response.headers["X-Process-Time"] = str(time.time() - start_time)
    return response


@app.get("/health", response_model=HealthResponse)
async def health_check(request: Request):
    pipeline: Optional[PosePipeline] = getattr(request.app.state, "pipeline", None)
    return HealthResponse(
        status="healthy" if pipeline is not None else "degraded",
        environment=settings.environment,
        version=settings.app_version,
        skeleton_loaded=pipeline is not None,
        prior_loaded=pipeline is not None and pipeline.prior is not None,
        model_loaded=pipeline is not None and pipeline.regressor is not None,
    )


app.include_router(
    poses.router,
    prefix=f"{settings.api_prefix}/poses",
    tags=["Poses"],
)


@app.exception_handler(InputError)
async def input_error_handler(request: Request, exc: InputError):
    logger.warning(f"Rejected request to {request.url.path}: {exc}")
    return JSONResponse(
        status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
        content={"detail": str(exc), "error": type(exc).__name__},
    )


@app.exception_handler(NumericalError)
async def numerical_error_handler(request: Request, exc: NumericalError):
    logger.error(f"Numerical failure on {request.url.path}: {exc}")
    return JSONResponse(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR,
        content={"detail": str(exc), "error": type(exc).__name__},
    )


# Global exception handler
@app.exception_handler(Exception)
async def global_exception_handler(request: Request, exc: Exception):
    logger.error(f"Global exception handler caught: {exc}", exc_info=True)
    return JSONResponse(status_code=500, content={"detail": "Internal server error"})


if __name__ == "__main__":
    import uvicorn

    uvicorn.run(
        "poserefine.main:app",
        host=settings.api_host,
        port=settings.api_port,
        reload=settings.debug,
    )
