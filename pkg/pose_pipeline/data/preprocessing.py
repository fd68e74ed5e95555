import logging
from typing import Union

import numpy as np

from pose_pipeline.constants import MAX_DEPTH, MIN_DEPTH
from pose_pipeline.errors import InputError

logger = logging.getLogger(__name__)


def normalize_depth_range(
    raw: Union[float, np.ndarray], clamp: bool = True
) -> Union[float, np.ndarray]:
    """Map sensor depth in ``[0, 8]`` m linearly onto ``[-0.5, 0.5]``."""
    values = np.asarray(raw, dtype=np.float64)
    out_of_range = ~((values >= MIN_DEPTH) & (values <= MAX_DEPTH))
    if np.any(out_of_range):
        if not clamp:
            raise InputError(f"Depth values outside [{MIN_DEPTH}, {MAX_DEPTH}] m")
        if np.any(np.isnan(values)):
            raise InputError("Cannot normalize NaN depth values")
        logger.warning(f"Clamping {int(out_of_range.sum())} depth values into [{MIN_DEPTH}, {MAX_DEPTH}] m")
        values = np.clip(values, MIN_DEPTH, MAX_DEPTH)
    normalized = values / MAX_DEPTH - 0.5
    return float(normalized) if normalized.ndim == 0 else normalized
