"""Threat scoring and threat-weighted image fusion.

Two interchangeable ways to score how dangerous a detected hazard is,
both yielding t_f in [0, 1]:

* radar procedure - from longitudinal/lateral distances (cm):
      T   = sqrt( ((lx_max - lx)/lx_max)^2 + ((ly_max - ly)/ly_max)^2 )
      t_f = (T - t_min) / (t_max - t_min)      inside the gate
      t_f = 0                                  if lx > lx_max or ly > ly_max
  The min-max bounds default to the analytic extrema of T on the gated
  domain (0 and sqrt(2)), so scores are per-sample deterministic.

* pixel procedure - from the segmented image, using the hazard pixel
  closest to the bottom-center point (h, w/2) of an h x w image:
      t_f = 1 - sqrt((x - h)^2 + (y - w/2)^2) / sqrt(h^2 + (w/2)^2)
  x is the row index (0 at the top), y the column index.  The reference
  point (h, w/2) lies half a pixel below the last row; real pixels top
  out a hair under t_f = 1, and a pixel at (0, 0) scores exactly 0.

The fused controller input is the convex blend
    (1 - t_f) * original + t_f * segmented
computed per pixel per channel on real-valued images; the endpoints
return exact copies so a zero-threat frame is bit-identical to the raw
frame.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .core import ImageTensor
from .render import hazard_pixel_mask
from .world import RadarReading

SOURCE_RADAR = "radar"
SOURCE_PIXEL = "pixel"


@dataclass(frozen=True)
class ThreatConfig:
    lx_max_cm: float = 6000.0
    ly_max_cm: float = 370.0
    t_min: float = 0.0
    t_max: float = math.sqrt(2.0)

    def __post_init__(self):
        if self.lx_max_cm <= 0 or self.ly_max_cm <= 0:
            raise ValueError("distance gates must be positive")
        if self.t_max <= self.t_min:
            raise ValueError("t_max must exceed t_min")


DEFAULT_THREAT_CONFIG = ThreatConfig()


@dataclass(frozen=True)
class ThreatScore:
    t_f: float
    source: str
    hazard_index: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.t_f <= 1.0:
            raise ValueError(f"t_f out of range: {self.t_f}")


def threat_radar(lx_cm: float, ly_cm: float, cfg: ThreatConfig = DEFAULT_THREAT_CONFIG) -> ThreatScore:
    if lx_cm < 0 or ly_cm < 0:
        raise ValueError(f"distances must be non-negative, got ({lx_cm}, {ly_cm})")
    if lx_cm > cfg.lx_max_cm or ly_cm > cfg.ly_max_cm:
        return ThreatScore(0.0, SOURCE_RADAR)
    t = math.hypot(
        (cfg.lx_max_cm - lx_cm) / cfg.lx_max_cm,
        (cfg.ly_max_cm - ly_cm) / cfg.ly_max_cm,
    )
    tf = (t - cfg.t_min) / (cfg.t_max - cfg.t_min)
    return ThreatScore(min(1.0, max(0.0, tf)), SOURCE_RADAR)


def threat_from_reading(reading: RadarReading, cfg: ThreatConfig = DEFAULT_THREAT_CONFIG) -> ThreatScore:
    """Most-threatening detection wins; empty reading scores 0."""
    best = ThreatScore(0.0, SOURCE_RADAR)
    for det in reading.detections:
        score = threat_radar(det.lx_cm, det.ly_cm, cfg)
        if score.t_f > best.t_f:
            best = ThreatScore(score.t_f, SOURCE_RADAR, hazard_index=det.hazard_index)
    return best


def pixel_threat_value(x: float, y: float, h: int, w: int) -> float:
    """The pixel-procedure formula at image coordinates (x=row, y=col)."""
    dist = math.hypot(x - h, y - w / 2.0)
    norm = math.hypot(h, w / 2.0)
    return min(1.0, max(0.0, 1.0 - dist / norm))


def threat_pixel(seg: ImageTensor) -> ThreatScore:
    """Score from the hazard pixel nearest the bottom-center of ``seg``.

    Ties break to the smallest row-major pixel index; an image with no
    hazard pixels scores 0 (so fusion degrades to the raw frame).
    """
    mask = hazard_pixel_mask(seg)
    if not mask.any():
        return ThreatScore(0.0, SOURCE_PIXEL)
    rows, cols = np.nonzero(mask)
    h, w = seg.height, seg.width
    d2 = (rows - float(h)) ** 2 + (cols - w / 2.0) ** 2
    i = int(np.argmin(d2))
    return ThreatScore(pixel_threat_value(int(rows[i]), int(cols[i]), h, w), SOURCE_PIXEL)


def fuse(original: ImageTensor, segmented: ImageTensor, t: ThreatScore) -> ImageTensor:
    """Per-pixel convex blend of the two frames with weight t.t_f."""
    if original.data.shape != segmented.data.shape:
        raise ValueError(
            f"fusion dimension mismatch: {original.data.shape} vs {segmented.data.shape}"
        )
    if original.value_range != segmented.value_range:
        raise ValueError("fusion inputs must share a range convention")
    if t.t_f == 0.0:
        return ImageTensor(original.data.copy(), original.value_range)
    if t.t_f == 1.0:
        return ImageTensor(segmented.data.copy(), segmented.value_range)
    blended = (1.0 - t.t_f) * original.data + t.t_f * segmented.data
    return ImageTensor(blended, original.value_range)


def threat_heatmap(
    procedure: str,
    grid_n: int = 50,
    cfg: ThreatConfig = DEFAULT_THREAT_CONFIG,
    image_h: int = 400,
    image_w: int = 600,
):
    """Evaluate one procedure over a regular grid for plotting.

    Returns (coord1, coord2, t_f) arrays of length grid_n**2.  For the
    radar procedure the coordinates are (lx, ly) spanning the gate; for
    the pixel procedure they are (x, y) spanning the image.
    """
    if procedure == SOURCE_RADAR:
        c1 = np.linspace(0.0, cfg.lx_max_cm, grid_n)
        c2 = np.linspace(0.0, cfg.ly_max_cm, grid_n)
        value = lambda a, b: threat_radar(a, b, cfg).t_f
    elif procedure == SOURCE_PIXEL:
        c1 = np.linspace(0.0, float(image_h), grid_n)
        c2 = np.linspace(0.0, float(image_w), grid_n)
        value = lambda a, b: pixel_threat_value(a, b, image_h, image_w)
    else:
        raise ValueError(f"unknown procedure {procedure!r}")
    g1, g2, tf = [], [], []
    for a in c1:
        for b in c2:
            g1.append(a)
            g2.append(b)
            tf.append(value(a, b))
    return np.array(g1), np.array(g2), np.array(tf)


def write_heatmap_csv(path, procedure: str, grid_n: int = 50, **kwargs) -> None:
    c1, c2, tf = threat_heatmap(procedure, grid_n, **kwargs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["coord1", "coord2", "t_f"])
        for a, b, t in zip(c1, c2, tf):
            w.writerow([repr(float(a)), repr(float(b)), repr(float(t))])
