from enum import Enum


class Provenance(str, Enum):
    DETECTED = "detected"
    DEPTH_FILLED = "depth_filled"
    PRIOR_RECOVERED = "prior_recovered"
    CENTROID_FILLED = "centroid_filled"


class RecoveryMode(str, Enum):
    PRIOR = "prior"
    TRUNK_CENTROID = "trunk_centroid"


# Sensor range for valid depth values (meters)
MIN_DEPTH = 0.0
MAX_DEPTH = 8.0

# Binary formats
DEPTH_FRAME_MAGIC = b"RPDEPTH1"
MODEL_MAGIC = b"RPMODEL1"
MODEL_FORMAT_VERSION = 1
PRIOR_FORMAT_VERSION = 1

# Report rows, in table order; symmetric parts average left and right
BODY_PART_ORDER = [
    "Head",
    "Neck",
    "Shoulders",
    "Elbows",
    "Hands",
    "Torso",
    "Hips",
    "Knees",
    "Feet",
]
SIDE_PREFIXES = ("left_", "right_")
PLURAL_PART_NAMES = {"foot": "Feet"}

DEFAULT_PCK_FRACTIONS = [round(0.02 * k, 2) for k in range(1, 11)]
