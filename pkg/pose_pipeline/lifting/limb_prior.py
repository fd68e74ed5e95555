import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from pose_pipeline.constants import PRIOR_FORMAT_VERSION
from pose_pipeline.errors import (
    ChecksumError,
    FormatVersionError,
    InputError,
    NumericalError,
    SchemaError,
)
from pose_pipeline.skeleton import SkeletonModel

logger = logging.getLogger(__name__)


class PriorConfig(BaseModel):
    epsilon: float = Field(default=1e-6, gt=0)


@dataclass(frozen=True)
class LimbPrior:
    """Joint Gaussians over ``(l_i, l_pa(i))`` for every non-root limb.

    Each mean is a 6-vector (child limb first, parent limb last) and each
    covariance a 6x6 SPD matrix in meters squared.
    """

    means: Dict[int, np.ndarray]
    covariances: Dict[int, np.ndarray]
    parents: Dict[int, int]
    epsilon: float
    skeleton_checksum: str

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format_version": PRIOR_FORMAT_VERSION,
            "skeleton_checksum": self.skeleton_checksum,
            "epsilon": self.epsilon,
            "limbs": [
                {
                    "limb": limb,
                    "parent_limb": self.parents[limb],
                    "mean": self.means[limb].tolist(),
                    "covariance": self.covariances[limb].reshape(-1).tolist(),
                }
                for limb in sorted(self.means)
            ],
        }


def _joint_limb_samples(model: SkeletonModel, poses3d: np.ndarray, limb: int) -> np.ndarray:
    vectors = model.limb_vectors(poses3d)
    return np.concatenate(
        [vectors[:, limb, :], vectors[:, model.limb_parents[limb], :]], axis=1
    )


def fit_limb_prior(
    model: SkeletonModel,
    poses3d: Union[np.ndarray, Sequence[np.ndarray]],
    config: PriorConfig = PriorConfig(),
) -> LimbPrior:
    """Maximum-likelihood pairwise limb Gaussians from ground-truth poses."""
    poses = np.asarray(poses3d, dtype=np.float64)
    if poses.ndim != 3 or poses.shape[1:] != (model.num_landmarks, 3):
        raise InputError(
            f"Expected poses of shape (N, {model.num_landmarks}, 3), got {poses.shape}"
        )
    if poses.shape[0] < 2:
        raise InputError(f"Fitting the limb prior needs at least 2 poses, got {poses.shape[0]}")
    if not np.all(np.isfinite(poses)):
        raise InputError("Training poses contain non-finite coordinates")

    means: Dict[int, np.ndarray] = {}
    covariances: Dict[int, np.ndarray] = {}
    for limb in model.non_root_limbs:
        samples = _joint_limb_samples(model, poses, limb)
        mean = samples.mean(axis=0)
        centered = samples - mean
        cov = centered.T @ centered / samples.shape[0]
        cov = 0.5 * (cov + cov.T) + config.epsilon * np.eye(6)
        means[limb] = mean
        covariances[limb] = cov

    logger.info(f"Fitted limb prior over {poses.shape[0]} poses, {len(means)} limb pairs")
    return LimbPrior(
        means=means,
        covariances=covariances,
        parents={limb: model.limb_parents[limb] for limb in means},
        epsilon=config.epsilon,
        skeleton_checksum=model.checksum,
    )


def recover_landmark(prior: LimbPrior, limb: int, parent_vector: np.ndarray) -> np.ndarray:
    """Conditional mean of ``l_limb`` given its parent limb vector."""
    if limb not in prior.means:
        raise InputError(f"Limb {limb} has no prior (root limb or unknown index)")
    parent_vector = np.asarray(parent_vector, dtype=np.float64)
    if parent_vector.shape != (3,) or not np.all(np.isfinite(parent_vector)):
        raise InputError("Parent limb vector must be a finite 3-vector")

    mean = prior.means[limb]
    cov = prior.covariances[limb]
    mu_child, mu_parent = mean[:3], mean[3:]
    cov_cp = cov[:3, 3:]
    cov_pp = cov[3:, 3:]
    try:
        innovation = np.linalg.solve(cov_pp, parent_vector - mu_parent)
    except np.linalg.LinAlgError as e:
        raise NumericalError(f"Parent covariance block of limb {limb} is singular") from e
    return mu_child + cov_cp @ innovation


class _PriorLimbEntry(BaseModel):
    limb: int
    parent_limb: int
    mean: list[float] = Field(..., min_length=6, max_length=6)
    covariance: list[float] = Field(..., min_length=36, max_length=36)


class _PriorFile(BaseModel):
    format_version: int
    skeleton_checksum: str
    epsilon: float
    limbs: list[_PriorLimbEntry]


def save_limb_prior(prior: LimbPrior, path: Union[str, Path]) -> None:
    Path(path).write_text(json.dumps(prior.to_dict(), indent=2), encoding="utf-8")


def load_limb_prior(path: Union[str, Path], model: SkeletonModel) -> LimbPrior:
    """Read a prior manifest, refusing one fitted for a different skeleton."""
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        data = _PriorFile.model_validate(raw)
    except (OSError, ValueError) as e:
        raise SchemaError(f"Cannot read limb prior {path}: {e}") from e

    if data.format_version != PRIOR_FORMAT_VERSION:
        raise FormatVersionError(
            f"Prior format version {data.format_version} != {PRIOR_FORMAT_VERSION}"
        )
    if data.skeleton_checksum != model.checksum:
        raise ChecksumError("Limb prior was fitted for a different skeleton")

    means, covariances, parents = {}, {}, {}
    for entry in data.limbs:
        cov = np.asarray(entry.covariance, dtype=np.float64).reshape(6, 6)
        if not np.allclose(cov, cov.T, rtol=0.0, atol=1e-12):
            raise SchemaError(f"Covariance of limb {entry.limb} is not symmetric")
        means[entry.limb] = np.asarray(entry.mean, dtype=np.float64)
        covariances[entry.limb] = cov
        parents[entry.limb] = entry.parent_limb

    if set(means) != set(model.non_root_limbs):
        raise SchemaError("Limb prior does not cover every non-root limb of the skeleton")
    return LimbPrior(
        means=means,
        covariances=covariances,
        parents=parents,
        epsilon=data.epsilon,
        skeleton_checksum=data.skeleton_checksum,
    )
