"""Synthetic articulated scenes with a known lifting error.

Joints come from forward kinematics over the skeleton's limb tree. The
observed surface point of every joint sits a fixed distance in front of it
(toward the camera, bent sideways by a per-joint amount), so lifted poses
differ from the ground truth by a smooth, learnable offset.
"""

import logging
from typing import Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, Field

from pose_pipeline.data.records import Detection2D, SampleRecord
from pose_pipeline.errors import InputError
from pose_pipeline.lifting import CameraIntrinsics, lift_point, project_point
from pose_pipeline.skeleton import SkeletonModel, recovery_order

logger = logging.getLogger(__name__)

# Camera frame: x right, y down, z away from the camera. Directions describe
# an upright person facing the camera; keyed by the limb's child landmark.
DEFAULT_REST_DIRECTIONS: Dict[str, Tuple[float, float, float]] = {
    "neck": (0.0, -1.0, 0.0),
    "head": (0.0, -1.0, 0.0),
    "right_shoulder": (-1.0, 0.0, 0.0),
    "left_shoulder": (1.0, 0.0, 0.0),
    "right_elbow": (0.0, 1.0, 0.0),
    "left_elbow": (0.0, 1.0, 0.0),
    "right_hand": (0.0, 1.0, 0.0),
    "left_hand": (0.0, 1.0, 0.0),
    "right_hip": (-0.45, 1.0, 0.0),
    "left_hip": (0.45, 1.0, 0.0),
    "right_knee": (0.0, 1.0, 0.0),
    "left_knee": (0.0, 1.0, 0.0),
    "right_foot": (0.0, 1.0, 0.0),
    "left_foot": (0.0, 1.0, 0.0),
}

DEFAULT_LIMB_LENGTHS: Dict[str, Tuple[float, float]] = {
    "neck": (0.38, 0.46),
    "head": (0.18, 0.24),
    "right_shoulder": (0.15, 0.21),
    "left_shoulder": (0.15, 0.21),
    "right_elbow": (0.26, 0.33),
    "left_elbow": (0.26, 0.33),
    "right_hand": (0.24, 0.30),
    "left_hand": (0.24, 0.30),
    "right_hip": (0.18, 0.25),
    "left_hip": (0.18, 0.25),
    "right_knee": (0.38, 0.46),
    "left_knee": (0.38, 0.46),
    "right_foot": (0.38, 0.46),
    "left_foot": (0.38, 0.46),
}


class SynthConfig(BaseModel):
    samples: int = Field(default=1000, ge=1)
    seed: int = 0

    # camera
    width: int = Field(default=512, gt=0)
    height: int = Field(default=424, gt=0)
    fx: float = Field(default=365.0, gt=0)
    fy: float = Field(default=365.0, gt=0)
    min_distance: float = Field(default=1.5, gt=0)
    max_distance: float = Field(default=6.0, gt=0)

    # body
    rest_directions: Dict[str, Tuple[float, float, float]] = Field(
        default_factory=lambda: dict(DEFAULT_REST_DIRECTIONS)
    )
    limb_lengths: Dict[str, Tuple[float, float]] = Field(
        default_factory=lambda: dict(DEFAULT_LIMB_LENGTHS)
    )
    yaw_range: float = Field(default=0.8, ge=0, description="radians")
    tilt_range: float = Field(default=0.15, ge=0, description="radians")
    articulation: float = Field(default=0.7, ge=0, description="radians")
    trunk_articulation: float = Field(default=0.1, ge=0, description="radians")

    # observation
    offset_magnitude: float = Field(default=0.03, ge=0, description="meters")
    offset_bend: float = Field(default=0.3, ge=0)
    depth_noise: float = Field(default=0.005, ge=0, description="meters")
    pixel_noise: float = Field(default=0.0, ge=0, description="pixels")
    dropout: float = Field(default=0.1, ge=0, le=1)
    trunk_dropout: float = Field(default=0.0, ge=0, le=1)
    min_extra_trunk: int = Field(default=2, ge=0)
    confidence_mean: float = Field(default=0.8, ge=0, le=1)
    confidence_std: float = Field(default=0.1, ge=0)
    confidence_floor: float = Field(default=0.05, ge=0, le=1)

    def intrinsics(self) -> CameraIntrinsics:
        return CameraIntrinsics.for_image(self.width, self.height, self.fx, self.fy)


def axis_angle_rotation(axis: np.ndarray, angle: float) -> np.ndarray:
    x, y, z = axis / np.linalg.norm(axis)
    c, s = np.cos(angle), np.sin(angle)
    t = 1.0 - c
    return np.array(
        [
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ]
    )


def _random_rotation(rng: np.random.Generator, amplitude: float) -> np.ndarray:
    axis = rng.normal(size=3)
    return axis_angle_rotation(axis, rng.uniform(-amplitude, amplitude))


def sample_pose(
    config: SynthConfig, model: SkeletonModel, rng: np.random.Generator
) -> np.ndarray:
    """One ``(J, 3)`` articulated pose, relative to the spine's parent landmark."""
    yaw = axis_angle_rotation(np.array([0.0, 1.0, 0.0]), rng.uniform(-config.yaw_range, config.yaw_range))
    tilt = _random_rotation(rng, config.tilt_range)
    rotations = {model.root_limb: yaw @ tilt}

    pose = np.zeros((model.num_landmarks, 3))
    for limb in recovery_order(model):
        child, shared = model.limbs[limb]
        if limb != model.root_limb:
            in_trunk = child in model.trunk_landmarks and shared in model.trunk_landmarks
            amplitude = config.trunk_articulation if in_trunk else config.articulation
            rotations[limb] = rotations[model.limb_parents[limb]] @ _random_rotation(rng, amplitude)
        name = model.landmarks[child]
        direction = np.asarray(config.rest_directions[name], dtype=np.float64)
        low, high = config.limb_lengths[name]
        length = rng.uniform(low, high)
        pose[child] = pose[shared] + rotations[limb] @ (direction / np.linalg.norm(direction)) * length
    return pose


def surface_offsets(joints: np.ndarray, magnitude: float, bend: float) -> np.ndarray:
    """Offset of each joint's visible surface point, exactly ``magnitude`` long.

    Points toward the camera, bent sideways in the image plane by a fixed
    per-joint direction.
    """
    J = joints.shape[0]
    toward_camera = -joints / np.linalg.norm(joints, axis=1, keepdims=True)
    angles = 2.0 * np.pi * np.arange(J) / J
    lateral = np.stack([np.cos(angles), np.sin(angles), np.zeros(J)], axis=1)
    direction = toward_camera + bend * lateral
    return magnitude * direction / np.linalg.norm(direction, axis=1, keepdims=True)


def _detection_mask(
    config: SynthConfig, model: SkeletonModel, rng: np.random.Generator
) -> np.ndarray:
    J = model.num_landmarks
    draws = rng.random(J)
    root = set(model.root_landmarks)
    extra_trunk = sorted(model.trunk_landmarks - root)
    detected = np.ones(J, dtype=bool)
    for j in range(J):
        if j in root:
            continue
        rate = config.trunk_dropout if j in model.trunk_landmarks else config.dropout
        detected[j] = draws[j] >= rate

    # keep the trunk guarantee: re-enable dropped trunk landmarks in order
    for j in extra_trunk:
        if detected[extra_trunk].sum() >= config.min_extra_trunk:
            break
        detected[j] = True
    return detected


def _validate(config: SynthConfig, model: SkeletonModel) -> None:
    if config.trunk_dropout >= 1.0:
        raise InputError("trunk_dropout of 1 can never satisfy the trunk guarantee")
    if config.max_distance < config.min_distance:
        raise InputError("max_distance must not be smaller than min_distance")
    if len(model.trunk_landmarks - set(model.root_landmarks)) < config.min_extra_trunk:
        raise InputError(
            f"Skeleton '{model.name}' has fewer than {config.min_extra_trunk} trunk landmarks besides the spine"
        )
    missing = [
        model.landmarks[child]
        for child, _ in model.limbs
        if model.landmarks[child] not in config.rest_directions
        or model.landmarks[child] not in config.limb_lengths
    ]
    if missing:
        raise InputError(f"No rest direction or limb length for: {', '.join(missing)}")
    for name, (low, high) in config.limb_lengths.items():
        if not 0 < low <= high:
            raise InputError(f"Invalid limb length range for {name}: ({low}, {high})")


def generate_synthetic(config: SynthConfig, model: SkeletonModel) -> List[SampleRecord]:
    """Deterministic synthetic dataset for ``(config, config.seed)``."""
    _validate(config, model)
    rng = np.random.default_rng(config.seed)
    intrinsics = config.intrinsics()
    anchor = model.root_landmarks[1]
    records: List[SampleRecord] = []

    for i in range(config.samples):
        pose = sample_pose(config, model, rng)
        distance = rng.uniform(config.min_distance, config.max_distance)
        u0 = rng.uniform(0.35, 0.65) * config.width
        v0 = rng.uniform(0.4, 0.6) * config.height
        joints = pose - pose[anchor] + lift_point(u0, v0, distance, intrinsics)

        surface = joints + surface_offsets(joints, config.offset_magnitude, config.offset_bend)
        uv = project_point(surface, intrinsics)
        if config.pixel_noise > 0:
            uv = uv + rng.normal(scale=config.pixel_noise, size=uv.shape)
        depths = surface[:, 2] + (
            rng.normal(scale=config.depth_noise, size=len(surface)) if config.depth_noise > 0 else 0.0
        )

        detected = _detection_mask(config, model, rng)
        confidence = np.where(
            detected,
            np.clip(
                rng.normal(config.confidence_mean, config.confidence_std, size=len(detected)),
                config.confidence_floor,
                1.0,
            ),
            rng.uniform(0.0, config.confidence_floor, size=len(detected)),
        )

        gt_2d = project_point(joints, intrinsics)
        bbox_height = float(gt_2d[:, 1].max() - gt_2d[:, 1].min())
        records.append(
            SampleRecord(
                sample_id=f"synth-{config.seed}-{i:06d}",
                intrinsics=intrinsics,
                detections=[
                    Detection2D(u=float(u), v=float(v), confidence=float(c), detected=bool(d))
                    for (u, v), c, d in zip(uv, confidence, detected)
                ],
                depths=[float(z) if d else None for z, d in zip(depths, detected)],
                ground_truth=[tuple(float(c) for c in joint) for joint in joints],
                gt_2d=[tuple(float(c) for c in p) for p in gt_2d],
                bbox_height=bbox_height,
            )
        )

    logger.info(
        f"Generated {len(records)} synthetic samples (offset={config.offset_magnitude} m, "
        f"noise={config.depth_noise} m, dropout={config.dropout})"
    )
    return records
