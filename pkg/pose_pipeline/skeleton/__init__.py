from pose_pipeline.skeleton.skeleton_model import (
    DEFAULT_SKELETON_PATH,
    SkeletonModel,
    load_skeleton,
    recovery_order,
    skeleton_from_definition,
)

__all__ = [
    "DEFAULT_SKELETON_PATH",
    "SkeletonModel",
    "load_skeleton",
    "recovery_order",
    "skeleton_from_definition",
]
