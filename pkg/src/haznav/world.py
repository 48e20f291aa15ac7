"""Deterministic 2D driving world: road, hazards, vehicle, range sensor.

Plane conventions (used by every module that touches geometry):

* axes: x/y in meters; headings in radians measured from +x toward +y
* a heading increase turns the vehicle toward its RIGHT, so positive
  steering (= steer right) adds a positive heading increment
* lateral offsets are positive to the LEFT of the reference line

The road centerline is a chain of straight and circular-arc segments,
tangent-continuous by construction (each segment starts at the previous
end pose).  Lanes live at fixed lateral offsets from that centerline;
the vehicle's driving lane sits at -lane_width/2 (first lane right of
the centerline).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .core import SteeringAngle, steering_to_direction
from .rng import Rng

RADAR_MAX_RANGE_CM = 6000.0
RADAR_HALF_FOV_RAD = math.radians(45.0)


class PlacementError(Exception):
    """Hazard placement cannot satisfy the spacing constraint."""


# ---------------------------------------------------------------------------
# road geometry


@dataclass(frozen=True)
class StraightSegment:
    length: float


@dataclass(frozen=True)
class ArcSegment:
    radius: float
    angle_rad: float  # total heading change, > 0
    turn: int  # +1 right, -1 left

    @property
    def length(self) -> float:
        return self.radius * self.angle_rad


def _rot(phi: float) -> np.ndarray:
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, -s], [s, c]])


class Road:
    """Piecewise arc/line centerline with station/lateral queries."""

    def __init__(self, segments, lane_width: float = 3.7, lanes_per_direction: int = 2):
        if not segments:
            raise ValueError("road needs at least one segment")
        if lane_width <= 0:
            raise ValueError("lane_width must be positive")
        self.segments = tuple(segments)
        self.lane_width = lane_width
        self.lanes_per_direction = lanes_per_direction
        # start pose (x, y, heading) of each segment, chained from origin
        poses = [(0.0, 0.0, 0.0)]
        stations = [0.0]
        for seg in self.segments:
            x, y, th = poses[-1]
            if isinstance(seg, StraightSegment):
                x += seg.length * math.cos(th)
                y += seg.length * math.sin(th)
            else:
                x, y, th = self._arc_end(seg, x, y, th)
            poses.append((x, y, th))
            stations.append(stations[-1] + seg.length)
        self._poses = poses
        self._stations = stations
        self.total_length = stations[-1]

    @staticmethod
    def _arc_end(seg: ArcSegment, x, y, th):
        cx, cy = Road._arc_center(seg, x, y, th)
        sweep = seg.turn * seg.angle_rad
        v = _rot(sweep) @ np.array([x - cx, y - cy])
        return cx + v[0], cy + v[1], th + sweep

    @staticmethod
    def _arc_center(seg: ArcSegment, x, y, th):
        # right turn: center on the right (+r hat); left turn: on the left
        rx, ry = -math.sin(th), math.cos(th)
        return x + seg.turn * seg.radius * rx, y + seg.turn * seg.radius * ry

    @property
    def half_width(self) -> float:
        return self.lane_width * self.lanes_per_direction

    @property
    def driving_lane_lateral(self) -> float:
        """Lateral offset of the default driving lane center (right of centerline)."""
        return -self.lane_width / 2.0

    def lane_centers(self):
        """Lateral offsets of the same-direction lane centers."""
        return [-(k + 0.5) * self.lane_width for k in range(self.lanes_per_direction)]

    def marking_laterals(self):
        """Lateral offsets of painted lines (center, separators, edges)."""
        marks = [0.0]
        for k in range(1, self.lanes_per_direction):
            marks += [k * self.lane_width, -k * self.lane_width]
        edge = self.half_width - 0.1
        marks += [edge, -edge]
        return sorted(marks)

    def frame_at(self, s: float):
        """(x, y, heading) of the centerline at station s (clamped to the road)."""
        s = min(max(s, 0.0), self.total_length)
        idx = 0
        for i, seg in enumerate(self.segments):
            if s <= self._stations[i + 1] or i == len(self.segments) - 1:
                idx = i
                break
        ds = s - self._stations[idx]
        x, y, th = self._poses[idx]
        seg = self.segments[idx]
        if isinstance(seg, StraightSegment):
            return x + ds * math.cos(th), y + ds * math.sin(th), th
        cx, cy = self._arc_center(seg, x, y, th)
        sweep = seg.turn * ds / seg.radius
        v = _rot(sweep) @ np.array([x - cx, y - cy])
        return cx + v[0], cy + v[1], th + sweep

    def point_at(self, s: float, lateral: float):
        """World point at (station, lateral offset); lateral positive left."""
        x, y, th = self.frame_at(s)
        lx, ly = math.sin(th), -math.cos(th)  # unit left vector
        return x + lateral * lx, y + lateral * ly

    def locate_points(self, px: np.ndarray, py: np.ndarray):
        """Vectorized inverse query: station, lateral, and validity per point.

        A point is valid when some segment covers it (its projection falls
        inside the segment's station span).  Among covering segments the one
        with the smallest |lateral| wins, which resolves overlaps on the
        inside of curves.
        """
        px = np.asarray(px, dtype=np.float64)
        py = np.asarray(py, dtype=np.float64)
        best_abs = np.full(px.shape, np.inf)
        station = np.zeros(px.shape)
        lateral = np.zeros(px.shape)
        eps = 1e-9
        for i, seg in enumerate(self.segments):
            x0, y0, th = self._poses[i]
            s0 = self._stations[i]
            if isinstance(seg, StraightSegment):
                dx, dy = px - x0, py - y0
                tx, ty = math.cos(th), math.sin(th)
                lxv, lyv = math.sin(th), -math.cos(th)
                s_local = dx * tx + dy * ty
                lat = dx * lxv + dy * lyv
                ok = (s_local >= -eps) & (s_local <= seg.length + eps)
            else:
                cx, cy = self._arc_center(seg, x0, y0, th)
                dx, dy = px - cx, py - cy
                rho = np.hypot(dx, dy)
                lat = seg.turn * (rho - seg.radius)
                v0x, v0y = x0 - cx, y0 - cy
                ang = np.arctan2(v0x * dy - v0y * dx, v0x * dx + v0y * dy)
                sweep = seg.turn * ang
                s_local = sweep * seg.radius
                ok = (sweep >= -eps / seg.radius) & (sweep <= seg.angle_rad + eps)
            better = ok & (np.abs(lat) < best_abs)
            best_abs = np.where(better, np.abs(lat), best_abs)
            station = np.where(better, s0 + s_local, station)
            lateral = np.where(better, lat, lateral)
        valid = np.isfinite(best_abs)
        return station, lateral, valid

    def locate(self, x: float, y: float):
        """Scalar (station, lateral) of the nearest centerline point."""
        s, lat, ok = self.locate_points(np.array([x]), np.array([y]))
        if not ok[0]:
            raise ValueError(f"point ({x:.2f}, {y:.2f}) is beyond the road ends")
        return float(s[0]), float(lat[0])


def default_segments(total_length=1663.0, n_curves=16, radius=40.0):
    """Road recipe: n alternating curves joined by equal straights.

    Curve turn angles cycle through 45..90 degrees; straight fillers are
    sized so the whole centerline has the requested length.
    """
    magnitudes = [60.0, 75.0, 90.0, 45.0, 70.0, 85.0, 50.0, 65.0]
    arcs = []
    for i in range(n_curves):
        ang = math.radians(magnitudes[i % len(magnitudes)])
        arcs.append(ArcSegment(radius=radius, angle_rad=ang, turn=1 if i % 2 == 0 else -1))
    arc_total = sum(a.length for a in arcs)
    filler = (total_length - arc_total) / (n_curves + 1)
    if filler <= 1.0:
        raise ValueError(
            f"curves use {arc_total:.0f} m of the {total_length:.0f} m road; "
            "reduce curve count or radius"
        )
    segments = [StraightSegment(filler)]
    for arc in arcs:
        segments += [arc, StraightSegment(filler)]
    return segments


# ---------------------------------------------------------------------------
# hazards


@dataclass(frozen=True)
class HazardKind:
    name: str
    half_len: float
    half_wid: float
    height: float
    color_id: int


HAZARD_KINDS = (
    HazardKind("rock", 0.50, 0.40, 0.45, 0),
    HazardKind("wooden_box", 0.55, 0.55, 0.60, 1),
    HazardKind("oil_barrel", 0.30, 0.30, 0.90, 2),
    HazardKind("wooden_pallet", 0.60, 0.50, 0.15, 3),
    HazardKind("pipe_section", 1.00, 0.35, 0.40, 4),
)


@dataclass(frozen=True)
class HazardObject:
    kind: HazardKind
    x: float
    y: float
    heading: float
    station: float
    lane_lateral: float


# ---------------------------------------------------------------------------
# vehicle


@dataclass(frozen=True)
class VehicleState:
    x: float
    y: float
    heading: float
    speed: float
    wheelbase: float = 2.5
    steering: SteeringAngle = field(default_factory=lambda: SteeringAngle(0.0))

    def __post_init__(self):
        if self.speed < 0:
            raise ValueError("speed must be >= 0")
        if self.wheelbase <= 0:
            raise ValueError("wheelbase must be positive")


def step_vehicle(v: VehicleState, dt: float) -> VehicleState:
    """Kinematic bicycle step: advance along heading, then rotate by
    (speed*dt / wheelbase) * tan(steer angle).  Speed is conserved."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    ds = v.speed * dt
    x = v.x + ds * math.cos(v.heading)
    y = v.y + ds * math.sin(v.heading)
    delta = steering_to_direction(v.steering).radians
    heading = v.heading + (ds / v.wheelbase) * math.tan(delta)
    return replace(v, x=x, y=y, heading=heading)


# ---------------------------------------------------------------------------
# world assembly


@dataclass(frozen=True)
class WorldConfig:
    total_length: float = 1663.0
    n_curves: int = 16
    curve_radius: float = 40.0
    lane_width: float = 3.7
    lanes_per_direction: int = 2
    hazard_count: int = 12
    hazard_lane: str = "driving"  # or "random"
    min_spacing: float = 30.0
    hazard_station_min: float = 60.0
    hazard_station_margin_end: float = 25.0
    speed: float = 10.0
    dt_ms: int = 50
    wheelbase: float = 2.5
    start_station: float = 2.0

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, d: dict) -> "WorldConfig":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown world config fields: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class WorldState:
    road: Road
    hazards: tuple
    vehicle: VehicleState
    lane_lateral: float
    speed: float
    dt_ms: int

    def with_vehicle(self, v: VehicleState) -> "WorldState":
        return replace(self, vehicle=v)


def _spaced_stations(rng: Rng, count: int, lo: float, hi: float, gap: float):
    """count pseudo-random stations in [lo, hi] with pairwise gaps >= gap."""
    if count == 0:
        return []
    slack = (hi - lo) - (count - 1) * gap
    if slack < 0:
        raise PlacementError(
            f"cannot place {count} hazards on [{lo:.0f}, {hi:.0f}] m "
            f"with {gap:.0f} m spacing (needs {(count - 1) * gap:.0f} m of road)"
        )
    u = sorted(rng.next_float() for _ in range(count))
    return [lo + u[i] * slack + i * gap for i in range(count)]


def build_world(rng: Rng, cfg: WorldConfig) -> WorldState:
    """Pure function of (rng seed, config): road + hazards + start pose."""
    road = Road(
        default_segments(cfg.total_length, cfg.n_curves, cfg.curve_radius),
        lane_width=cfg.lane_width,
        lanes_per_direction=cfg.lanes_per_direction,
    )
    stations = _spaced_stations(
        rng,
        cfg.hazard_count,
        cfg.hazard_station_min,
        road.total_length - cfg.hazard_station_margin_end,
        cfg.min_spacing,
    )
    hazards = []
    lanes = road.lane_centers()
    for s in stations:
        kind = HAZARD_KINDS[rng.next_below(len(HAZARD_KINDS))]
        if cfg.hazard_lane == "random":
            lane = lanes[rng.next_below(len(lanes))] + rng.uniform(-0.4, 0.4)
        else:
            lane = road.driving_lane_lateral
        jitter = rng.uniform(-math.radians(15), math.radians(15))
        hx, hy = road.point_at(s, lane)
        _, _, th = road.frame_at(s)
        hazards.append(
            HazardObject(kind=kind, x=hx, y=hy, heading=th + jitter, station=s, lane_lateral=lane)
        )
    sx, sy, sth = road.frame_at(cfg.start_station)
    lane0 = road.driving_lane_lateral
    vx, vy = road.point_at(cfg.start_station, lane0)
    vehicle = VehicleState(x=vx, y=vy, heading=sth, speed=cfg.speed, wheelbase=cfg.wheelbase)
    return WorldState(
        road=road,
        hazards=tuple(hazards),
        vehicle=vehicle,
        lane_lateral=lane0,
        speed=cfg.speed,
        dt_ms=cfg.dt_ms,
    )


# ---------------------------------------------------------------------------
# range sensing


@dataclass(frozen=True)
class RadarDetection:
    hazard_index: int
    lx_cm: float
    ly_cm: float


@dataclass(frozen=True)
class RadarReading:
    detections: tuple

    def __len__(self) -> int:
        return len(self.detections)


def radar_scan(world: WorldState) -> RadarReading:
    """Detections for hazards within 6000 cm longitudinally and +/-45 deg
    of boresight, reported in the vehicle frame (cm)."""
    v = world.vehicle
    fx, fy = math.cos(v.heading), math.sin(v.heading)
    rx, ry = -math.sin(v.heading), math.cos(v.heading)
    hits = []
    for i, h in enumerate(world.hazards):
        dx = (h.x - v.x) * fx + (h.y - v.y) * fy
        dy = (h.x - v.x) * rx + (h.y - v.y) * ry
        if dx < 0:
            continue
        lx = dx * 100.0
        ly = abs(dy) * 100.0
        if lx > RADAR_MAX_RANGE_CM:
            continue
        if math.atan2(abs(dy), dx) > RADAR_HALF_FOV_RAD + 1e-12:
            continue
        hits.append(RadarDetection(hazard_index=i, lx_cm=lx, ly_cm=ly))
    return RadarReading(detections=tuple(hits))


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    t_ms: np.ndarray
    lateral_m: np.ndarray
    station_m: np.ndarray
    direction_deg: np.ndarray
    left_road: bool = False
    collided: bool = False
    collision_t_ms: int | None = None

    def __len__(self) -> int:
        return len(self.t_ms)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t_ms", "lateral_m", "station_m", "direction_deg"])
            for i in range(len(self.t_ms)):
                w.writerow(
                    [
                        int(self.t_ms[i]),
                        repr(float(self.lateral_m[i])),
                        repr(float(self.station_m[i])),
                        repr(float(self.direction_deg[i])),
                    ]
                )


def point_in_hazard(h: HazardObject, x: float, y: float) -> bool:
    fx, fy = math.cos(h.heading), math.sin(h.heading)
    rx, ry = -math.sin(h.heading), math.cos(h.heading)
    dx, dy = x - h.x, y - h.y
    return abs(dx * fx + dy * fy) <= h.kind.half_len and abs(dx * rx + dy * ry) <= h.kind.half_wid
