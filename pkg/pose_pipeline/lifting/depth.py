import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Protocol, Tuple, Union

import numpy as np

from pose_pipeline.constants import DEPTH_FRAME_MAGIC, MAX_DEPTH, MIN_DEPTH
from pose_pipeline.errors import InputError, SchemaError
from pose_pipeline.lifting.camera import CameraIntrinsics

_HEADER = struct.Struct("<8sII")


def valid_depth_mask(depth: np.ndarray) -> np.ndarray:
    depth = np.asarray(depth, dtype=np.float64)
    with np.errstate(invalid="ignore"):
        return np.isfinite(depth) & (depth > MIN_DEPTH) & (depth <= MAX_DEPTH)


def _round_pixel(value: float) -> int:
    return int(np.floor(value + 0.5))


class DepthSource(Protocol):
    """Where a landmark's depth comes from during lifting."""

    def resolve_depth(
        self, landmark: int, u: float, v: float, radius: int
    ) -> Tuple[Optional[float], bool]:
        """Return ``(depth, was_filled)``; depth is ``None`` when unresolvable."""
        ...


@dataclass(frozen=True)
class DepthFrame:
    """Row-major depth image in meters; invalid pixels are <= 0 or non-finite."""

    depth: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        depth = np.array(self.depth, dtype=np.float64)
        if depth.ndim != 2:
            raise InputError(f"Depth frame must be 2-D, got shape {depth.shape}")
        depth.setflags(write=False)
        object.__setattr__(self, "depth", depth)

    @property
    def height(self) -> int:
        return self.depth.shape[0]

    @property
    def width(self) -> int:
        return self.depth.shape[1]

    def contains(self, u: float, v: float) -> bool:
        if not (np.isfinite(u) and np.isfinite(v)):
            return False
        col, row = _round_pixel(u), _round_pixel(v)
        return 0 <= col < self.width and 0 <= row < self.height

    def resolve_depth(
        self, landmark: int, u: float, v: float, radius: int
    ) -> Tuple[Optional[float], bool]:
        # Detections outside the frame are treated as undetected
        if not self.contains(u, v):
            return None, False
        center = self.depth[_round_pixel(v), _round_pixel(u)]
        if valid_depth_mask(center):
            return float(center), False
        filled = fill_depth(self, u, v, radius)
        return filled, filled is not None


def fill_depth(frame: DepthFrame, u: float, v: float, radius: int) -> Optional[float]:
    """Depth at ``(u, v)``, or the mean valid depth of its square neighborhood.

    Returns ``None`` when the ``(2 * radius + 1)``-wide window has no valid pixel.
    """
    if radius < 0:
        raise InputError(f"Fill radius must be non-negative, got {radius}")
    if not frame.contains(u, v):
        raise InputError(f"Pixel ({u}, {v}) lies outside the {frame.width}x{frame.height} frame")

    col, row = _round_pixel(u), _round_pixel(v)
    center = frame.depth[row, col]
    if valid_depth_mask(center):
        return float(center)

    window = frame.depth[
        max(row - radius, 0) : row + radius + 1,
        max(col - radius, 0) : col + radius + 1,
    ]
    mask = valid_depth_mask(window)
    if not mask.any():
        return None
    return float(window[mask].mean())


@dataclass(frozen=True)
class LandmarkDepths:
    """Per-landmark depth values stored inline with a sample (NaN = invalid)."""

    depths: np.ndarray

    def resolve_depth(
        self, landmark: int, u: float, v: float, radius: int
    ) -> Tuple[Optional[float], bool]:
        value = float(self.depths[landmark])
        if valid_depth_mask(value):
            return value, False
        return None, False


def write_depth_frame(path: Union[str, Path], frame: DepthFrame) -> None:
    """Binary sidecar: magic, uint32 width, uint32 height, LE float32 depths (invalid = 0)."""
    depth = np.where(valid_depth_mask(frame.depth), frame.depth, 0.0).astype("<f4")
    with open(path, "wb") as f:
        f.write(_HEADER.pack(DEPTH_FRAME_MAGIC, frame.width, frame.height))
        f.write(depth.tobytes(order="C"))


def read_depth_frame(path: Union[str, Path], intrinsics: CameraIntrinsics) -> DepthFrame:
    data = Path(path).read_bytes()
    if len(data) < _HEADER.size:
        raise SchemaError(f"Depth frame {path} is truncated")
    magic, width, height = _HEADER.unpack_from(data)
    if magic != DEPTH_FRAME_MAGIC:
        raise SchemaError(f"Depth frame {path} has a bad magic header")
    expected = _HEADER.size + 4 * width * height
    if len(data) != expected:
        raise SchemaError(f"Depth frame {path} has {len(data)} bytes, expected {expected}")
    depth = np.frombuffer(data, dtype="<f4", offset=_HEADER.size).reshape(height, width)
    return DepthFrame(depth=depth.astype(np.float64), intrinsics=intrinsics)
