"""Controller layer schedules and parameter accounting.

The architecture is fixed in shape: five convolutions (three 5x5/stride-2,
two 3x3/stride-1) into four fully connected layers ending at one steering
output.  Filter counts and dense widths are configuration.

Two canonical schedules ship with the package:

* ``full_scale()`` - 200x600x3 input (a 400x600 frame with the top 200
  rows cropped), valid padding, conv filters 24/36/48/64/64, dense
  100/50/10/1.  Its parameter count is exactly 7,970,619.
* ``desk_default()`` - the same filter/dense widths on a 50x150x3 input
  (100x150 frame, top half cropped).  Fifty input rows are exhausted
  after the stride-2 stack, so the two 3x3 convolutions use same-padding
  there; parameter count 444,219.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class ConvSpec:
    filters: int
    kernel: tuple[int, int]
    stride: tuple[int, int]
    pad: str = "valid"  # or "same"

    def padding(self) -> tuple[int, int]:
        if self.pad == "valid":
            return (0, 0)
        if self.pad == "same":
            if self.stride != (1, 1):
                raise ValueError("same-padding only supported for stride 1")
            return ((self.kernel[0] - 1) // 2, (self.kernel[1] - 1) // 2)
        raise ValueError(f"unknown padding {self.pad!r}")


@dataclass(frozen=True)
class LayerSchedule:
    input_hw: tuple[int, int]
    conv: tuple[ConvSpec, ...]
    dense: tuple[int, ...]
    crop_rows: int = 0  # rows removed from the frame top before the net
    channels: int = 3

    def __post_init__(self):
        if not self.dense or self.dense[-1] != 1:
            raise ValueError("dense stack must end in width 1")
        self.shapes()  # raises if some layer output collapses

    def shapes(self):
        """Spatial shape after each conv layer, ending with the flat width."""
        h, w = self.input_hw
        c = self.channels
        out = []
        for spec in self.conv:
            ph, pw = spec.padding()
            h = (h + 2 * ph - spec.kernel[0]) // spec.stride[0] + 1
            w = (w + 2 * pw - spec.kernel[1]) // spec.stride[1] + 1
            if h <= 0 or w <= 0:
                raise ValueError(
                    f"conv layer {len(out) + 1} output collapses to {h}x{w}; "
                    "input too small for this schedule"
                )
            c = spec.filters
            out.append((h, w, c))
        return out

    @property
    def flat_width(self) -> int:
        h, w, c = self.shapes()[-1]
        return h * w * c

    def to_dict(self) -> dict:
        return {
            "input_hw": list(self.input_hw),
            "crop_rows": self.crop_rows,
            "conv": [
                {
                    "filters": s.filters,
                    "kernel": list(s.kernel),
                    "stride": list(s.stride),
                    "pad": s.pad,
                }
                for s in self.conv
            ],
            "dense": list(self.dense),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSchedule":
        return cls(
            input_hw=tuple(d["input_hw"]),
            crop_rows=d.get("crop_rows", 0),
            conv=tuple(
                ConvSpec(
                    filters=s["filters"],
                    kernel=tuple(s["kernel"]),
                    stride=tuple(s["stride"]),
                    pad=s.get("pad", "valid"),
                )
                for s in d["conv"]
            ),
            dense=tuple(d["dense"]),
        )

    @classmethod
    def desk_default(cls) -> "LayerSchedule":
        return cls(
            input_hw=(50, 150),
            crop_rows=50,
            conv=_conv_stack(24, 36, 48, 64, 64, tail_pad="same"),
            dense=(100, 50, 10, 1),
        )

    @classmethod
    def full_scale(cls) -> "LayerSchedule":
        return cls(
            input_hw=(200, 600),
            crop_rows=200,
            conv=_conv_stack(24, 36, 48, 64, 64, tail_pad="valid"),
            dense=(100, 50, 10, 1),
        )

    @classmethod
    def desk_slim(cls) -> "LayerSchedule":
        """Narrow desk variant used by the experiment runner so the full
        three-case protocol stays tractable on one CPU core."""
        return cls(
            input_hw=(50, 150),
            crop_rows=50,
            conv=_conv_stack(12, 18, 24, 32, 32, tail_pad="same"),
            dense=(64, 32, 10, 1),
        )


def _conv_stack(f1, f2, f3, f4, f5, tail_pad="valid"):
    return (
        ConvSpec(f1, (5, 5), (2, 2), "valid"),
        ConvSpec(f2, (5, 5), (2, 2), "valid"),
        ConvSpec(f3, (5, 5), (2, 2), "valid"),
        ConvSpec(f4, (3, 3), (1, 1), tail_pad),
        ConvSpec(f5, (3, 3), (1, 1), tail_pad),
    )


def param_count(schedule: LayerSchedule) -> int:
    """Trainable parameter total: kh*kw*cin*cout + cout per conv layer,
    nin*nout + nout per dense layer."""
    total = 0
    cin = schedule.channels
    for spec in schedule.conv:
        total += spec.kernel[0] * spec.kernel[1] * cin * spec.filters + spec.filters
        cin = spec.filters
    nin = schedule.flat_width
    for nout in schedule.dense:
        total += nin * nout + nout
        nin = nout
    return total
