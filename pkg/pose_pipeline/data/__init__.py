from pose_pipeline.data.dataset_io import read_dataset, write_dataset
from pose_pipeline.data.preprocessing import normalize_depth_range
from pose_pipeline.data.records import Detection2D, SampleRecord
from pose_pipeline.data.synthetic import (
    SynthConfig,
    generate_synthetic,
    sample_pose,
    surface_offsets,
)

__all__ = [
    "Detection2D",
    "SampleRecord",
    "SynthConfig",
    "generate_synthetic",
    "normalize_depth_range",
    "read_dataset",
    "sample_pose",
    "surface_offsets",
    "write_dataset",
]
