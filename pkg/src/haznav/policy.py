"""Steering policies: the scripted expert and the per-case controllers.

The expert is a pure-pursuit tracker on the driving-lane centerline.
When a hazard sits in the same lane within 40 m ahead it shifts its
target line sideways by 1.5 lane widths (toward the road center), with
trapezoidal ramps before and after the hazard so the commanded path is
continuous.  It reads world geometry directly and needs no camera.

Case controllers wrap a trained network: the raw center frame is fused
with the segmentation under the case's threat model, normalized, and
regressed to a steering command.  Case 1 skips fusion entirely.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import ImageTensor, SteeringAngle
from .net.model import ControllerNet
from .pipeline import normalize_image
from .threat import DEFAULT_THREAT_CONFIG, ThreatConfig, fuse, threat_from_reading, threat_pixel
from .world import RadarReading, Road, WorldState

CASE_IDS = (1, 2, 3)

BYPASS_ENGAGE_AHEAD_M = 40.0
BYPASS_RAMP_M = 20.0  # offset reaches full strength this far into the approach
BYPASS_HOLD_BEHIND_M = 5.0
BYPASS_RELEASE_M = 20.0


class PurePursuitExpert:
    """Scripted ground-truth driver; deterministic given the world."""

    needs_camera = False

    def __init__(self, world: WorldState, lookahead_m: float = 12.0):
        self.road: Road = world.road
        self.lane_lateral = world.lane_lateral
        self.lookahead = lookahead_m
        self.bypass_offset = 1.5 * world.road.lane_width
        self.hazards = [
            h
            for h in world.hazards
            if abs(h.lane_lateral - world.lane_lateral) < world.road.lane_width / 2.0
        ]

    def bypass_at(self, station: float) -> float:
        """Lateral bypass offset commanded at a given station."""
        amount = 0.0
        for h in self.hazards:
            d = h.station - station  # positive while the hazard is ahead
            if -BYPASS_HOLD_BEHIND_M - BYPASS_RELEASE_M <= d <= BYPASS_ENGAGE_AHEAD_M:
                if d >= BYPASS_ENGAGE_AHEAD_M - BYPASS_RAMP_M:
                    frac = (BYPASS_ENGAGE_AHEAD_M - d) / BYPASS_RAMP_M
                elif d >= -BYPASS_HOLD_BEHIND_M:
                    frac = 1.0
                else:
                    frac = 1.0 + (d + BYPASS_HOLD_BEHIND_M) / BYPASS_RELEASE_M
                amount = max(amount, max(0.0, min(1.0, frac)))
        return amount * self.bypass_offset

    def steer(self, obs) -> SteeringAngle:
        v = obs.vehicle
        station, _ = self.road.locate(v.x, v.y)
        s_target = min(station + self.lookahead, self.road.total_length)
        lateral = self.lane_lateral + self.bypass_at(s_target)
        tx, ty = self.road.point_at(s_target, lateral)
        fx, fy = math.cos(v.heading), math.sin(v.heading)
        rx, ry = -math.sin(v.heading), math.cos(v.heading)
        fwd = (tx - v.x) * fx + (ty - v.y) * fy
        right = (tx - v.x) * rx + (ty - v.y) * ry
        dist = math.hypot(fwd, right)
        if dist < 1e-9:
            return SteeringAngle(0.0)
        alpha = math.atan2(right, fwd)
        curvature = 2.0 * math.sin(alpha) / dist
        delta = math.atan(v.wheelbase * curvature)
        return SteeringAngle(math.degrees(delta) / 50.0)


def build_case_input(
    case: int,
    frame: ImageTensor,
    segmented: ImageTensor,
    radar: RadarReading,
    threat_cfg: ThreatConfig = DEFAULT_THREAT_CONFIG,
) -> ImageTensor:
    """The raw (pre-normalization) controller input for one case."""
    if case == 1:
        return frame
    if case == 2:
        return fuse(frame, segmented, threat_from_reading(radar, threat_cfg))
    if case == 3:
        return fuse(frame, segmented, threat_pixel(segmented))
    raise ValueError(f"case must be one of {CASE_IDS}, got {case}")


@dataclass
class CasePolicy:
    """Trained controller wired for one experiment case."""

    net: ControllerNet
    case: int
    threat_cfg: ThreatConfig = DEFAULT_THREAT_CONFIG

    needs_camera = True

    def steer(self, obs) -> SteeringAngle:
        raw = build_case_input(self.case, obs.frame, obs.segmented, obs.radar, self.threat_cfg)
        x = normalize_image(raw, crop_rows=self.net.schedule.crop_rows)
        return self.net.predict_image(x)


class ConstantPolicy:
    needs_camera = False

    def __init__(self, steering: float = 0.0):
        self.command = SteeringAngle(steering)

    def steer(self, obs) -> SteeringAngle:
        return self.command
