from typing import Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from pose_pipeline.errors import InputError

ArrayLike = Union[float, np.ndarray]


class CameraIntrinsics(BaseModel):
    """Pinhole depth-camera intrinsics in pixels.

    ``cx`` and ``cy`` default to 0, where lifting reduces to
    ``Z * diag(1/fx, 1/fy, 1) * (u, v, 1)``. Use :meth:`for_image` to put the
    principal point at the image center, as the synthetic generator does.
    """

    model_config = ConfigDict(frozen=True)

    fx: float = Field(..., gt=0)
    fy: float = Field(..., gt=0)
    cx: float = 0.0
    cy: float = 0.0

    @classmethod
    def for_image(cls, width: int, height: int, fx: float, fy: float) -> "CameraIntrinsics":
        """Intrinsics with the principal point at the image center."""
        return cls(fx=fx, fy=fy, cx=width / 2.0, cy=height / 2.0)

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )


def lift_point(u: ArrayLike, v: ArrayLike, Z: ArrayLike, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Back-project pixel(s) with depth ``Z`` (meters) into the camera frame.

    Accepts scalars or broadcastable arrays; returns ``(..., 3)``.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if not np.all(np.isfinite(Z)) or np.any(Z <= 0):
        raise InputError("Depth must be finite and positive to lift a point")

    x = Z * (u - intrinsics.cx) / intrinsics.fx
    y = Z * (v - intrinsics.cy) / intrinsics.fy
    x, y, Z = np.broadcast_arrays(x, y, Z)
    return np.stack([x, y, Z], axis=-1)


def project_point(points: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of ``(..., 3)`` camera points to ``(..., 2)`` pixels."""
    points = np.asarray(points, dtype=np.float64)
    z = points[..., 2]
    if np.any(z <= 0):
        raise InputError("Cannot project points at or behind the camera plane")
    u = points[..., 0] * intrinsics.fx / z + intrinsics.cx
    v = points[..., 1] * intrinsics.fy / z + intrinsics.cy
    return np.stack([u, v], axis=-1)
