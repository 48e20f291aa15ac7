"""Shared value types: images, steering angles, driving directions.

Conventions fixed here and inherited everywhere else:

* steering is normalized to [-0.5, +0.5]; positive steers right
* driving direction = 50 x normalized steering, in degrees (so +/-25 deg)
* raw images hold real values in [0, 255]; normalized images in [-1, +1];
  quantization to 8-bit happens only at file boundaries (round half to even)
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

RANGE_RAW = "raw"
RANGE_NORMALIZED = "normalized"
_RANGE_BOUNDS = {RANGE_RAW: (0.0, 255.0), RANGE_NORMALIZED: (-1.0, 1.0)}

# Steering-to-direction linear map: +/-0.5 <-> +/-25 degrees.
DIRECTION_DEGREES_PER_UNIT_STEERING = 50.0
MAX_DIRECTION_DEG = 25.0

# Raw steering bounds used when normalizing simulator steering (radians).
RAW_STEER_MAX_RAD = math.radians(MAX_DIRECTION_DEG)
RAW_STEER_MIN_RAD = -RAW_STEER_MAX_RAD


class ImageTensor:
    """H x W x 3 raster of float64 channel values with a declared range.

    The declared range is an invariant: construction rejects any element
    outside it, so downstream code never needs to re-check.
    """

    __slots__ = ("data", "value_range")

    def __init__(self, data: np.ndarray, value_range: str = RANGE_RAW):
        if value_range not in _RANGE_BOUNDS:
            raise ValueError(f"unknown value range {value_range!r}")
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 3 or data.shape[2] != 3:
            raise ValueError(f"image must be HxWx3, got shape {data.shape}")
        lo, hi = _RANGE_BOUNDS[value_range]
        if data.size and (data.min() < lo or data.max() > hi):
            raise ValueError(
                f"image values outside declared {value_range} range "
                f"[{lo}, {hi}]: min={data.min()}, max={data.max()}"
            )
        self.data = data
        self.value_range = value_range

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 3

    def is_raw(self) -> bool:
        return self.value_range == RANGE_RAW

    def to_uint8(self) -> np.ndarray:
        """Quantize a raw-range image to bytes (round half to even)."""
        if not self.is_raw():
            raise ValueError("only raw-range images quantize to uint8")
        return np.clip(np.rint(self.data), 0, 255).astype(np.uint8)

    @classmethod
    def from_uint8(cls, arr: np.ndarray) -> "ImageTensor":
        return cls(arr.astype(np.float64), RANGE_RAW)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, ImageTensor)
            and self.value_range == other.value_range
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )


@dataclass(frozen=True)
class SteeringAngle:
    """Normalized steering command; clamped to [-0.5, +0.5] at construction."""

    normalized: float
    raw_rad: float | None = None

    def __post_init__(self):
        clamped = min(0.5, max(-0.5, float(self.normalized)))
        object.__setattr__(self, "normalized", clamped)

    @classmethod
    def from_raw(
        cls,
        raw_rad: float,
        raw_min: float = RAW_STEER_MIN_RAD,
        raw_max: float = RAW_STEER_MAX_RAD,
    ) -> "SteeringAngle":
        """Normalize a raw wheel angle:  -0.5 + clip((raw - min)/(max - min), 0, 1)."""
        frac = (raw_rad - raw_min) / (raw_max - raw_min)
        return cls(-0.5 + min(1.0, max(0.0, frac)), raw_rad=raw_rad)


@dataclass(frozen=True)
class DrivingDirection:
    """Road-plane movement angle in degrees, positive to the right."""

    degrees: float

    @property
    def radians(self) -> float:
        return math.radians(self.degrees)


def steering_to_direction(s: SteeringAngle) -> DrivingDirection:
    """Linear map from normalized steering to driving direction (degrees)."""
    return DrivingDirection(DIRECTION_DEGREES_PER_UNIT_STEERING * s.normalized)
