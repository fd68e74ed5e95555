from pose_pipeline.lifting.camera import CameraIntrinsics, lift_point, project_point
from pose_pipeline.lifting.depth import (
    DepthFrame,
    DepthSource,
    LandmarkDepths,
    fill_depth,
    read_depth_frame,
    valid_depth_mask,
    write_depth_frame,
)
from pose_pipeline.lifting.lifter import LiftConfig, LiftedPose, Pose2D, lift_pose
from pose_pipeline.lifting.limb_prior import (
    LimbPrior,
    PriorConfig,
    fit_limb_prior,
    load_limb_prior,
    recover_landmark,
    save_limb_prior,
)

__all__ = [
    "CameraIntrinsics",
    "DepthFrame",
    "DepthSource",
    "LandmarkDepths",
    "LiftConfig",
    "LiftedPose",
    "LimbPrior",
    "Pose2D",
    "PriorConfig",
    "fill_depth",
    "fit_limb_prior",
    "lift_point",
    "lift_pose",
    "load_limb_prior",
    "project_point",
    "read_depth_frame",
    "recover_landmark",
    "save_limb_prior",
    "valid_depth_mask",
    "write_depth_frame",
]
