"""Dataset pipeline: frame normalization, augmentation, capture, splits.

Capture drives the scripted expert through a world and records a sample
every ``capture_every`` simulation steps: the three camera frames, the
segmentation, the radar reading, and the expert's steering at that
instant as the label.  Augmentation then doubles the pool (one derived
copy per sample), the pool splits 80/20 into train/validation, and a
separately collected hazard-only world supplies the test split.

Frames are stored quantized (uint8) and rematerialized as float images
on access; rendered scenes are integer-colored so this is lossless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import RANGE_RAW, ImageTensor, SteeringAngle
from .render import CameraRig, hazard_pixel_mask, render, render_with_segmentation
from .rng import Rng
from .world import RadarReading, WorldState, radar_scan, step_vehicle

AUGMENT_TRANSFORMS = ("rotate", "brightness", "flip")
ROTATION_MAX_DEG = 5.0
BRIGHTNESS_SPAN = 0.2  # scale drawn from [0.8, 1.2]


class DatasetError(Exception):
    pass


# ---------------------------------------------------------------------------
# frame normalization


def normalize_image(img: ImageTensor, crop_rows: int | None = None) -> ImageTensor:
    """Crop the frame top and map [0, 255] -> [-1, +1].

    The crop removes ``crop_rows`` rows (default: the top half, which is
    the 200-of-400 rule generalized to any frame height).
    """
    if not img.is_raw():
        raise ValueError("normalize_image expects a raw-range image")
    if crop_rows is None:
        crop_rows = img.height // 2
    if crop_rows >= img.height:
        raise ValueError(f"image with {img.height} rows is too short to crop {crop_rows}")
    kept = img.data[crop_rows:, :, :]
    return ImageTensor(kept / 127.5 - 1.0, "normalized")


def denormalize_image(img: ImageTensor) -> ImageTensor:
    if img.is_raw():
        raise ValueError("image is already raw-range")
    return ImageTensor((img.data + 1.0) * 127.5, RANGE_RAW)


# ---------------------------------------------------------------------------
# augmentation


def rotate_image(img: ImageTensor, angle_deg: float) -> ImageTensor:
    """Rotate about the image center, nearest-neighbor, edge-clamped.

    Nearest sampling keeps values on the original color set, so rotated
    segmentations stay on the class palette.
    """
    h, w = img.height, img.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    ang = math.radians(angle_deg)
    c, s = math.cos(ang), math.sin(ang)
    rows, cols = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    # inverse map: rotate destination coords by -angle around the center
    ry = rows - cy
    rx = cols - cx
    src_r = np.rint(cy + ry * c - rx * s).astype(int)
    src_c = np.rint(cx + ry * s + rx * c).astype(int)
    np.clip(src_r, 0, h - 1, out=src_r)
    np.clip(src_c, 0, w - 1, out=src_c)
    return ImageTensor(img.data[src_r, src_c], img.value_range)


def brightness_image(img: ImageTensor, scale: float) -> ImageTensor:
    if not img.is_raw():
        raise ValueError("brightness augmentation expects raw-range images")
    return ImageTensor(np.clip(img.data * scale, 0.0, 255.0), RANGE_RAW)


def flip_image(img: ImageTensor) -> ImageTensor:
    return ImageTensor(img.data[:, ::-1, :].copy(), img.value_range)


# ---------------------------------------------------------------------------
# samples and datasets


@dataclass(frozen=True)
class Sample:
    center: ImageTensor
    left: ImageTensor
    right: ImageTensor
    segmented: ImageTensor
    label: SteeringAngle
    radar: RadarReading
    t_ms: int

    @property
    def has_hazard(self) -> bool:
        return bool(hazard_pixel_mask(self.segmented).any())


def augment(sample: Sample, rng: Rng, transforms=AUGMENT_TRANSFORMS) -> Sample:
    """One randomly chosen transform applied consistently across frames.

    Rotation and flipping act on all four rasters (flip negates the
    label); brightness only touches the camera frames, never the class
    palette.  Rotation and brightness leave the label unchanged.
    """
    if not transforms:
        raise ValueError("no augmentation transforms enabled")
    choice = transforms[rng.next_below(len(transforms))]
    if choice == "rotate":
        ang = rng.uniform(-ROTATION_MAX_DEG, ROTATION_MAX_DEG)
        return Sample(
            center=rotate_image(sample.center, ang),
            left=rotate_image(sample.left, ang),
            right=rotate_image(sample.right, ang),
            segmented=rotate_image(sample.segmented, ang),
            label=sample.label,
            radar=sample.radar,
            t_ms=sample.t_ms,
        )
    if choice == "brightness":
        k = rng.uniform(1.0 - BRIGHTNESS_SPAN, 1.0 + BRIGHTNESS_SPAN)
        return Sample(
            center=brightness_image(sample.center, k),
            left=brightness_image(sample.left, k),
            right=brightness_image(sample.right, k),
            segmented=sample.segmented,
            label=sample.label,
            radar=sample.radar,
            t_ms=sample.t_ms,
        )
    if choice == "flip":
        return Sample(
            center=flip_image(sample.center),
            left=flip_image(sample.right),
            right=flip_image(sample.left),
            segmented=flip_image(sample.segmented),
            label=SteeringAngle(-sample.label.normalized),
            radar=sample.radar,
            t_ms=sample.t_ms,
        )
    raise ValueError(f"unknown transform {choice!r}")


@dataclass
class _Record:
    center: np.ndarray  # uint8 HxWx3
    left: np.ndarray
    right: np.ndarray
    segmented: np.ndarray
    label: float
    radar: RadarReading
    t_ms: int
    has_hazard: bool
    augmented: bool = False


def _store(sample: Sample, augmented: bool = False) -> _Record:
    return _Record(
        center=sample.center.to_uint8(),
        left=sample.left.to_uint8(),
        right=sample.right.to_uint8(),
        segmented=sample.segmented.to_uint8(),
        label=sample.label.normalized,
        radar=sample.radar,
        t_ms=sample.t_ms,
        has_hazard=sample.has_hazard,
        augmented=augmented,
    )


class Dataset:
    """Pooled samples plus disjoint train/validation/test index sets."""

    def __init__(self):
        self.records: list[_Record] = []
        self.train_idx: list[int] = []
        self.val_idx: list[int] = []
        self.test_idx: list[int] = []

    def sample(self, i: int) -> Sample:
        r = self.records[i]
        return Sample(
            center=ImageTensor.from_uint8(r.center),
            left=ImageTensor.from_uint8(r.left),
            right=ImageTensor.from_uint8(r.right),
            segmented=ImageTensor.from_uint8(r.segmented),
            label=SteeringAngle(r.label),
            radar=r.radar,
            t_ms=r.t_ms,
        )

    @property
    def pool_size(self) -> int:
        return len(self.records) - len(self.test_idx)

    def labels(self, indices) -> np.ndarray:
        return np.array([self.records[i].label for i in indices])

    def counts(self) -> dict:
        return {
            "total": self.pool_size,
            "train": len(self.train_idx),
            "validation": len(self.val_idx),
            "test": len(self.test_idx),
        }


@dataclass(frozen=True)
class CaptureConfig:
    collect_count: int = 940
    test_count: int = 52
    capture_every: int = 3  # simulation steps between samples
    augment: bool = True
    transforms: tuple = AUGMENT_TRANSFORMS


def _capture(world: WorldState, policy, rig: CameraRig, every: int, want: int, hazard_only: bool):
    """Drive the expert and record samples; returns a list of Samples."""
    from .simloop import Observation  # local import to avoid a cycle

    samples = []
    v = world.vehicle
    dt = world.dt_ms / 1000.0
    step = 0
    max_steps = int(world.road.total_length / (world.speed * dt)) - 1
    while len(samples) < want and step <= max_steps:
        w = world.with_vehicle(v)
        radar = radar_scan(w)
        obs = Observation(world=w, vehicle=v, frame=None, segmented=None, radar=radar)
        steering = policy.steer(obs)
        if step % every == 0:
            center, seg = render_with_segmentation(w, rig)
            sample = Sample(
                center=center,
                left=render(w, rig, "left"),
                right=render(w, rig, "right"),
                segmented=seg,
                label=steering,
                radar=radar,
                t_ms=step * world.dt_ms,
            )
            if not hazard_only or sample.has_hazard:
                samples.append(sample)
        v = step_vehicle(_with_steering(v, steering), dt)
        step += 1
    if len(samples) < want:
        raise DatasetError(
            f"collected only {len(samples)} of {want} samples before the road ended"
        )
    return samples


def _with_steering(v, steering):
    from dataclasses import replace

    return replace(v, steering=steering)


def _augment_preserving_hazard(sample: Sample, rng: Rng, transforms) -> Sample:
    """Augment a test sample without losing its hazard pixels.

    A rotation can push the last hazard pixel out of a frame; when that
    happens fall back to the flip, which preserves pixel counts exactly.
    """
    out = augment(sample, rng, transforms)
    if sample.has_hazard and not out.has_hazard:
        out = augment(sample, rng, ("flip",))
    return out


def build_dataset(
    worlds,
    test_world: WorldState,
    policy_factory,
    cfg: CaptureConfig,
    rig: CameraRig,
    rng: Rng,
) -> Dataset:
    """Collect, augment, and split.

    ``worlds`` feed the train/validation pool; ``test_world`` supplies the
    hazard-only test split.  ``policy_factory(world)`` builds the scripted
    expert for each world.
    """
    if not worlds:
        raise DatasetError("need at least one training world")
    ds = Dataset()
    per_world = _split_counts(cfg.collect_count, len(worlds))
    collected = []
    for world, want in zip(worlds, per_world):
        collected += _capture(world, policy_factory(world), rig, cfg.capture_every, want, False)
    pool = [_store(s) for s in collected]
    if cfg.augment:
        for s in collected:
            pool.append(_store(augment(s, rng, cfg.transforms), augmented=True))
    order = list(range(len(pool)))
    rng.shuffle(order)
    n_train = round(0.8 * len(pool))
    ds.records = pool
    ds.train_idx = sorted(order[:n_train])
    ds.val_idx = sorted(order[n_train:])

    test_samples = _capture(
        test_world, policy_factory(test_world), rig, cfg.capture_every, cfg.test_count, True
    )
    test_records = [_store(s) for s in test_samples]
    if cfg.augment:
        for s in test_samples:
            test_records.append(_store(_augment_preserving_hazard(s, rng, cfg.transforms), augmented=True))
    base = len(ds.records)
    ds.records += test_records
    ds.test_idx = list(range(base, len(ds.records)))
    return ds


def _split_counts(total: int, n: int):
    per = [total // n] * n
    for i in range(total % n):
        per[i] += 1
    return per
