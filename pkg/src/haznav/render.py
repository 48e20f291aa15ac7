"""Flat-shaded perspective rasterizer and the ground-truth segmentation.

A pinhole camera (pitch 0, principal point at the image center) casts one
ray per pixel.  Rays either hit the ground plane z=0, the sides/top of a
hazard box, or escape to the sky.  Ground points are classified from the
road geometry (road surface / painted markings / off-road); hazard boxes
are oriented 3D boxes intersected with a slab test and win the depth
comparison against the ground.

``render`` and ``segment_oracle`` share the per-pixel class map and only
differ in the color table applied to it, so their hazard pixel sets agree
exactly by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ImageTensor
from .world import HAZARD_KINDS, WorldState

# class ids
OFF_ROAD = 0
ROAD = 1
LANE_MARKING = 2
HAZARD_CLASS_BASE = 3  # + kind.color_id, so 3..7
SKY = 8

MARKING_HALF_WIDTH = 0.1
RENDER_FAR_M = 200.0

# scene colors (what the cameras see)
SCENE_COLORS = np.array(
    [
        (90, 155, 85),  # off-road grass
        (95, 95, 95),  # asphalt
        (235, 235, 235),  # lane paint
        (128, 124, 118),  # rock
        (166, 120, 72),  # wooden box
        (160, 48, 42),  # oil barrel
        (196, 168, 116),  # wooden pallet
        (88, 96, 104),  # pipe section
        (135, 206, 235),  # sky
    ],
    dtype=np.float64,
)

# segmentation palette (one entry per class; sky maps to off-road)
PALETTE_COLORS = np.array(
    [
        (0, 200, 0),  # off-road
        (60, 60, 230),  # road
        (255, 255, 0),  # lane marking
        (255, 0, 0),  # rock
        (255, 128, 0),  # wooden box
        (255, 0, 255),  # oil barrel
        (0, 255, 255),  # wooden pallet
        (128, 0, 255),  # pipe section
        (0, 200, 0),  # sky -> off-road entry
    ],
    dtype=np.float64,
)

HAZARD_PALETTE = {
    HAZARD_CLASS_BASE + k.color_id: tuple(PALETTE_COLORS[HAZARD_CLASS_BASE + k.color_id])
    for k in HAZARD_KINDS
}


@dataclass(frozen=True)
class CameraRig:
    """Three forward cameras: center on the vehicle axis, sides symmetric."""

    image_height: int = 100
    image_width: int = 150
    hfov_rad: float = math.radians(90.0)
    cam_height: float = 1.4
    forward_offset: float = 1.0
    side_offset: float = 0.6
    side_yaw_rad: float = 0.0

    def focal_px(self) -> float:
        return (self.image_width / 2.0) / math.tan(self.hfov_rad / 2.0)

    def camera_pose(self, world: WorldState, camera: str):
        v = world.vehicle
        fx, fy = math.cos(v.heading), math.sin(v.heading)
        rx, ry = -math.sin(v.heading), math.cos(v.heading)
        lat = {"left": -self.side_offset, "center": 0.0, "right": self.side_offset}[camera]
        yaw = {"left": -self.side_yaw_rad, "center": 0.0, "right": self.side_yaw_rad}[camera]
        cx = v.x + self.forward_offset * fx + lat * rx
        cy = v.y + self.forward_offset * fy + lat * ry
        return cx, cy, v.heading + yaw


_grid_cache: dict = {}


def _pixel_grid(h: int, w: int):
    key = (h, w)
    if key not in _grid_cache:
        cols = np.arange(w, dtype=np.float64) + 0.5 - w / 2.0
        rows = h / 2.0 - (np.arange(h, dtype=np.float64) + 0.5)
        u, z = np.meshgrid(cols, rows)  # u right+, z up+
        _grid_cache[key] = (u, z)
    return _grid_cache[key]


def classify(world: WorldState, rig: CameraRig, camera: str = "center") -> np.ndarray:
    """Per-pixel class id map for one camera view."""
    h, w = rig.image_height, rig.image_width
    u, z = _pixel_grid(h, w)
    cx, cy, yaw = rig.camera_pose(world, camera)
    f = rig.focal_px()
    fx, fy = math.cos(yaw), math.sin(yaw)
    rx, ry = -math.sin(yaw), math.cos(yaw)
    dwx = f * fx + u * rx
    dwy = f * fy + u * ry

    classes = np.full((h, w), SKY, dtype=np.uint8)
    depth = np.full((h, w), np.inf)

    below = z < 0
    if below.any():
        t_ground = rig.cam_height / -z[below]
        gx = cx + t_ground * dwx[below]
        gy = cy + t_ground * dwy[below]
        station, lateral, valid = world.road.locate_points(gx, gy)
        ground_cls = np.full(gx.shape, OFF_ROAD, dtype=np.uint8)
        on_road = valid & (np.abs(lateral) <= world.road.half_width)
        ground_cls[on_road] = ROAD
        for m in world.road.marking_laterals():
            ground_cls[on_road & (np.abs(lateral - m) <= MARKING_HALF_WIDTH)] = LANE_MARKING
        classes[below] = ground_cls
        depth[below] = t_ground

    for hz in world.hazards:
        rel_fwd = (hz.x - cx) * fx + (hz.y - cy) * fy
        if rel_fwd > RENDER_FAR_M or rel_fwd < -(hz.kind.half_len + 2.0):
            continue
        t_hit = _box_hit(hz, cx, cy, rig.cam_height, dwx, dwy, z)
        closer = np.isfinite(t_hit) & (t_hit < depth)
        classes[closer] = HAZARD_CLASS_BASE + hz.kind.color_id
        depth[closer] = t_hit[closer]
    return classes


def _box_hit(hz, cx, cy, cam_h, dwx, dwy, dz):
    """Slab intersection of all pixel rays with one oriented hazard box.

    Returns the hit parameter per pixel (inf where the ray misses).
    """
    hfx, hfy = math.cos(hz.heading), math.sin(hz.heading)
    hrx, hry = -math.sin(hz.heading), math.cos(hz.heading)
    ox = (cx - hz.x) * hfx + (cy - hz.y) * hfy
    oy = (cx - hz.x) * hrx + (cy - hz.y) * hry
    dx = dwx * hfx + dwy * hfy
    dy = dwx * hrx + dwy * hry

    t_enter = np.full(dz.shape, -np.inf)
    t_exit = np.full(dz.shape, np.inf)
    for o, d, lo, hi in (
        (ox, dx, -hz.kind.half_len, hz.kind.half_len),
        (oy, dy, -hz.kind.half_wid, hz.kind.half_wid),
        (cam_h, dz, 0.0, hz.kind.height),
    ):
        with np.errstate(divide="ignore", invalid="ignore"):
            t1 = (lo - o) / d
            t2 = (hi - o) / d
        near = np.fmin(t1, t2)
        far = np.fmax(t1, t2)
        parallel = d == 0
        if np.isscalar(o):
            inside = np.full(dz.shape, lo <= o <= hi)
        else:
            inside = (o >= lo) & (o <= hi)
        near = np.where(parallel, np.where(inside, -np.inf, np.inf), near)
        far = np.where(parallel, np.where(inside, np.inf, -np.inf), far)
        t_enter = np.maximum(t_enter, near)
        t_exit = np.minimum(t_exit, far)
    hit = (t_enter <= t_exit) & (t_exit >= 0)
    t = np.maximum(t_enter, 0.0)
    return np.where(hit, t, np.inf)


def render(world: WorldState, rig: CameraRig, camera: str = "center") -> ImageTensor:
    """Scene-colored frame for one camera."""
    return ImageTensor(SCENE_COLORS[classify(world, rig, camera)])


def segment_oracle(world: WorldState, rig: CameraRig) -> ImageTensor:
    """Ground-truth segmentation of the center view (class palette colors)."""
    return ImageTensor(PALETTE_COLORS[classify(world, rig, "center")])


def render_with_segmentation(world: WorldState, rig: CameraRig):
    """Center frame and its segmentation from one shared class map."""
    ids = classify(world, rig, "center")
    return ImageTensor(SCENE_COLORS[ids]), ImageTensor(PALETTE_COLORS[ids])


def hazard_pixel_mask(seg: ImageTensor) -> np.ndarray:
    """Boolean mask of pixels carrying any hazard palette color."""
    mask = np.zeros((seg.height, seg.width), dtype=bool)
    for color in HAZARD_PALETTE.values():
        mask |= (seg.data == np.asarray(color)).all(axis=2)
    return mask
