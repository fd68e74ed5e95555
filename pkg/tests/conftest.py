import os
import tempfile

import numpy as np
import pytest
from httpx import ASGITransport, AsyncClient

# 1) Point to test env BEFORE importing settings
_LOG_DIR = tempfile.mkdtemp(prefix="poserefine-test-logs-")
os.environ["POSEREFINE_ENVIRONMENT"] = "test"
os.environ["POSEREFINE_LOG_FILE"] = os.path.join(_LOG_DIR, "test.log")
os.environ["POSEREFINE_LOG_LEVEL"] = "WARNING"
os.environ["PYTHONUNBUFFERED"] = "1"

from poserefine.config.settings import settings  # noqa: E402  now instantiated

settings.environment = "test"
settings.prior_path = None
settings.model_path = None

from pose_pipeline.data import SynthConfig, generate_synthetic  # noqa: E402
from pose_pipeline.lifting import fit_limb_prior  # noqa: E402
from pose_pipeline.pipeline import PosePipeline  # noqa: E402
from pose_pipeline.skeleton import load_skeleton  # noqa: E402
from poserefine.main import app  # noqa: E402


@pytest.fixture(scope="session")
def skeleton():
    return load_skeleton()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def synth_config():
    return SynthConfig(samples=400, seed=7, offset_magnitude=0.03, depth_noise=0.0, dropout=0.2)


@pytest.fixture(scope="session")
def synthetic_records(skeleton, synth_config):
    return generate_synthetic(synth_config, skeleton)


@pytest.fixture(scope="session")
def ground_truth_poses(synthetic_records):
    return np.stack([r.ground_truth_array() for r in synthetic_records])


@pytest.fixture(scope="session")
def limb_prior(skeleton, ground_truth_poses):
    return fit_limb_prior(skeleton, ground_truth_poses)


@pytest.fixture
def pipeline(skeleton, limb_prior):
    return PosePipeline(skeleton, limb_prior)


@pytest.fixture
async def client(pipeline):
    app.state.pipeline = pipeline
    async with AsyncClient(transport=ASGITransport(app=app), base_url="http://test") as ac:
        yield ac
    app.state.pipeline = None
