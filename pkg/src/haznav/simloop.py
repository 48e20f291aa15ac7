"""Closed-loop simulation: sense -> steer -> step, sampled every tick.

Policies that consume camera frames get a freshly rendered center frame
and segmentation each step; geometry-only policies (the expert) skip
rendering.  The rollout ends early, flagged, if the vehicle's reference
point leaves the paved width; driving over a hazard is detected and
flagged but does not alter the motion (no collision dynamics).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import ImageTensor, steering_to_direction
from .render import CameraRig, render_with_segmentation
from .world import Trajectory, WorldState, point_in_hazard, radar_scan, step_vehicle


@dataclass
class Observation:
    world: WorldState
    vehicle: object
    frame: ImageTensor | None
    segmented: ImageTensor | None
    radar: object


def rollout(
    world: WorldState,
    policy,
    duration_ms: int,
    dt_ms: int | None = None,
    rig: CameraRig | None = None,
) -> Trajectory:
    """Run the loop for duration_ms, sampling the trajectory every dt_ms."""
    dt_ms = world.dt_ms if dt_ms is None else dt_ms
    if dt_ms <= 0 or duration_ms % dt_ms != 0:
        raise ValueError("dt must be positive and divide the duration")
    if getattr(policy, "needs_camera", False) and rig is None:
        raise ValueError("camera policy needs a CameraRig")
    steps = duration_ms // dt_ms
    dt = dt_ms / 1000.0
    v = world.vehicle
    t_ms, lateral, station, direction = [], [], [], []
    left_road = False
    collided = False
    collision_t = None
    for k in range(steps):
        w = world.with_vehicle(v)
        s, lat_road = world.road.locate(v.x, v.y)
        if abs(lat_road) > world.road.half_width:
            left_road = True
            break
        if not collided:
            for h in world.hazards:
                if point_in_hazard(h, v.x, v.y):
                    collided = True
                    collision_t = k * dt_ms
                    break
        frame = seg = None
        if getattr(policy, "needs_camera", False):
            frame, seg = render_with_segmentation(w, rig)
        obs = Observation(
            world=w, vehicle=v, frame=frame, segmented=seg, radar=radar_scan(w)
        )
        steering = policy.steer(obs)
        t_ms.append(k * dt_ms)
        lateral.append(lat_road - world.lane_lateral)
        station.append(s)
        direction.append(steering_to_direction(steering).degrees)
        v = step_vehicle(replace(v, steering=steering), dt)
    return Trajectory(
        t_ms=np.array(t_ms, dtype=np.int64),
        lateral_m=np.array(lateral),
        station_m=np.array(station),
        direction_deg=np.array(direction),
        left_road=left_road,
        collided=collided,
        collision_t_ms=collision_t,
    )
