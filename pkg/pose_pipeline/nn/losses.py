from typing import Tuple

import numpy as np

from pose_pipeline.errors import DimensionMismatchError


def smooth_l1(pred: np.ndarray, target: np.ndarray, beta: float = 1.0) -> Tuple[float, np.ndarray]:
    """Mean smooth-L1 (Huber-style) loss and its gradient with respect to ``pred``.

    Per element ``0.5 * e**2 / beta`` when ``|e| < beta``, else ``|e| - 0.5 * beta``;
    averaged over every element (batch, landmarks, coordinates).
    """
    if pred.shape != target.shape:
        raise DimensionMismatchError(f"Loss shapes differ: {pred.shape} vs {target.shape}")
    diff = pred - target
    abs_diff = np.abs(diff)
    quadratic = abs_diff < beta
    per_element = np.where(quadratic, 0.5 * diff**2 / beta, abs_diff - 0.5 * beta)
    grad = np.where(quadratic, diff / beta, np.sign(diff)) / diff.size
    return float(per_element.mean()), grad
