"""Multi-vehicle 2D driving world with TORCS-style sensors and effectors.

Vehicles follow a kinematic bicycle model in the plane. Track-relative state
(arclength, lateral offset, heading error) is recovered by projecting onto the
centerline after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import ConfigError, ContractViolation
from .track import Track, oval, road_course, wrap_angle

MAX_STEER = 0.366519  # rad at steering = +-1
SENSOR_RANGE = 200.0
N_OPPONENTS = 36
TRACK_RAY_DEG = np.arange(-90, 91, 10)
OFF_TRACK = -1


class Kind(str, Enum):
    ADV = "ADV"
    NDV = "NDV"


class Termination(str, Enum):
    ARRIVAL = "ARRIVAL"
    REVERSAL = "REVERSAL"
    OFF_TRACK = "OFF_TRACK"
    TIME = "TIME"


@dataclass(frozen=True)
class Action:
    accel: float = 0.0
    brake: float = 0.0
    steering: float = 0.0

    @classmethod
    def from_array(cls, a) -> "Action":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def to_array(self) -> np.ndarray:
        return np.array([self.accel, self.brake, self.steering])

    def clipped(self) -> "Action":
        return Action(
            min(max(self.accel, 0.0), 1.0),
            min(max(self.brake, 0.0), 1.0),
            min(max(self.steering, -1.0), 1.0),
        )


@dataclass(frozen=True)
class SensorFrame:
    angle: float
    opponents: np.ndarray
    track: np.ndarray
    trackPos: float
    v: float
    speedY: float
    speedZ: float
    rpm: float
    wheelSpinVel: np.ndarray

    def to_vector(self) -> np.ndarray:
        """Raw channels in a fixed order (65 values)."""
        return np.concatenate(
            [
                [self.angle],
                self.opponents,
                self.track,
                [self.trackPos, self.v, self.speedY, self.speedZ, self.rpm],
                self.wheelSpinVel,
            ]
        )

    def mirrored(self) -> "SensorFrame":
        return SensorFrame(
            -self.angle,
            self.opponents[::-1].copy(),
            self.track[::-1].copy(),
            -self.trackPos,
            self.v,
            -self.speedY,
            self.speedZ,
            self.rpm,
            self.wheelSpinVel.copy(),
        )


@dataclass(frozen=True)
class LaneFrame:
    """The lane-keeping subset of a frame (what scripted traffic needs)."""

    angle: float
    trackPos: float
    v: float


FRAME_DIM = 1 + N_OPPONENTS + len(TRACK_RAY_DEG) + 5 + 4


@dataclass(frozen=True)
class CollisionEvent:
    a: int
    b: int  # other vehicle id, or OFF_TRACK
    timestep: int
    episode: int

    @property
    def off_track(self) -> bool:
        return self.b == OFF_TRACK

    def involves(self, vid: int) -> bool:
        return self.a == vid or self.b == vid


@dataclass
class VehicleState:
    id: int
    kind: Kind
    x: float
    y: float
    heading: float
    s: float
    d_lat: float
    psi: float
    v: float
    speedY: float = 0.0
    speedZ: float = 0.0
    rpm: float = 0.0
    wheelSpinVel: tuple = (0.0, 0.0, 0.0, 0.0)
    laps: int = 0
    alive: bool = True
    progress: float = 0.0
    target_speed: float | None = None
    reverse_steps: int = 0
    offtrack_steps: int = 0
    termination: Termination | None = None
    terminated_at: int | None = None


@dataclass
class DynamicsConfig:
    k_a: float = 3.0  # m/s^2 at full throttle
    k_b: float = 8.0  # m/s^2 at full brake
    k_d: float = 0.002  # 1/m, quadratic drag
    wheelbase: float = 2.6
    wheel_radius: float = 0.33
    rpm_idle: float = 600.0
    rpm_per_kmh: float = 80.0


@dataclass
class WorldConfig:
    track: str = "oval"
    track_length: float = 800.0
    track_width: float = 12.0
    n_adv: int = 2
    n_ndv: int = 3
    dt: float = 0.1
    T: int = 1000
    reversal_steps: int = 10
    offtrack_grace: int = 50
    vehicle_radius: float = 2.0
    grid_spacing: float = 25.0
    grid_start: float = 100.0
    grid_slots: int = 20
    grid_order: str = "adv_first"
    speed_min: float = 40.0
    speed_max: float = 60.0
    ndv_arrival: bool = False
    dynamics: DynamicsConfig = field(default_factory=DynamicsConfig)

    def validate(self) -> None:
        if self.dt <= 0:
            raise ConfigError("dt must be positive")
        if self.track_width <= 0:
            raise ConfigError("track width must be positive")
        if self.n_adv < 0 or self.n_ndv < 0:
            raise ConfigError("vehicle counts must be nonnegative")
        if self.n_adv + self.n_ndv > self.grid_slots:
            raise ConfigError(f"{self.n_adv + self.n_ndv} vehicles but only {self.grid_slots} grid slots")
        if self.grid_order not in ("adv_first", "ndv_first", "alternate"):
            raise ConfigError(f"unknown grid_order {self.grid_order!r}")
        if self.speed_min > self.speed_max or self.speed_min < 0:
            raise ConfigError("bad initial speed range")

    def build_track(self) -> Track:
        if self.track == "oval":
            return oval(self.track_length, self.track_width)
        if self.track == "road_course":
            return road_course(self.track_length, self.track_width)
        raise ConfigError(f"unknown track {self.track!r}")


@dataclass(frozen=True)
class Verdict:
    done: bool
    reason: Termination | None
    newly_terminated: dict


def grid_kinds(cfg: WorldConfig) -> list[Kind]:
    adv, ndv = [Kind.ADV] * cfg.n_adv, [Kind.NDV] * cfg.n_ndv
    if cfg.grid_order == "adv_first":
        return adv + ndv
    if cfg.grid_order == "ndv_first":
        return ndv + adv
    out = []
    for i in range(max(cfg.n_adv, cfg.n_ndv)):
        out += adv[i : i + 1] + ndv[i : i + 1]
    return out


class World:
    """Single-threaded simulation state; not safe to share across threads."""

    def __init__(self, cfg: WorldConfig, track: Track | None = None):
        cfg.validate()
        self.cfg = cfg
        self.track = track if track is not None else cfg.build_track()
        self.vehicles: dict[int, VehicleState] = {}
        self.t = 0
        self.episode = 0
        self._contacts: set = set()
        self._ray_offsets = np.deg2rad(TRACK_RAY_DEG.astype(float))

    # -- lifecycle ------------------------------------------------------

    def reset(self, seed: int, episode: int = 0) -> "World":
        cfg = self.cfg
        rng = np.random.default_rng(seed)
        self.vehicles = {}
        self.t = 0
        self.episode = episode
        self._contacts = set()
        quarter = self.track.width / 4
        for vid, kind in enumerate(grid_kinds(cfg)):
            s = (cfg.grid_start - vid * cfg.grid_spacing / 2) % self.track.length
            d_lat = quarter if vid % 2 == 0 else -quarter
            x, y, h = self.track.to_xy(s, d_lat)
            v = float(rng.uniform(cfg.speed_min, cfg.speed_max))
            target = float(rng.uniform(cfg.speed_min, cfg.speed_max)) if kind is Kind.NDV else None
            veh = VehicleState(vid, kind, x, y, h, s, d_lat, 0.0, v, target_speed=target)
            self._refresh(veh)
            self.vehicles[vid] = veh
        return self

    def add_vehicle(self, kind: Kind, s: float, d_lat: float, v: float = 0.0, psi: float = 0.0, **kw) -> VehicleState:
        """Place a vehicle by hand (tests and custom scenes)."""
        vid = kw.pop("vid", max(self.vehicles, default=-1) + 1)
        x, y, h = self.track.to_xy(s, d_lat)
        veh = VehicleState(vid, kind, x, y, wrap_angle(h + psi), s % self.track.length, d_lat, psi, v, **kw)
        self._refresh(veh)
        self.vehicles[vid] = veh
        return veh

    def alive_ids(self, kind: Kind | None = None) -> list[int]:
        return [vid for vid, v in self.vehicles.items() if v.alive and (kind is None or v.kind is kind)]

    # -- dynamics -------------------------------------------------------

    def _refresh(self, veh: VehicleState) -> None:
        """Recompute track-relative and synthesized channels from the pose."""
        dyn = self.cfg.dynamics
        s, d_lat = self.track.project(veh.x, veh.y)
        _, _, tangent = self.track.pose(s)
        veh.s, veh.d_lat = s, d_lat
        veh.psi = wrap_angle(veh.heading - tangent)
        veh.speedY = veh.v * math.sin(veh.psi)
        veh.speedZ = 0.0
        veh.rpm = dyn.rpm_idle + dyn.rpm_per_kmh * veh.v
        spin = (veh.v / 3.6) / dyn.wheel_radius
        veh.wheelSpinVel = (spin,) * 4

    def step(self, actions: dict) -> "World":
        cfg, dyn = self.cfg, self.cfg.dynamics
        dt = cfg.dt
        alive = self.alive_ids()
        for vid in alive:
            if vid not in actions:
                raise ContractViolation(f"no action for alive vehicle {vid}")
            a = actions[vid]
            if not all(math.isfinite(c) for c in (a.accel, a.brake, a.steering)):
                raise ContractViolation(f"non-finite action for vehicle {vid}: {a}")
        length = self.track.length
        for vid in alive:
            veh = self.vehicles[vid]
            a = actions[vid].clipped()
            v_ms = veh.v / 3.6
            veh.x += v_ms * math.cos(veh.heading) * dt
            veh.y += v_ms * math.sin(veh.heading) * dt
            veh.heading = wrap_angle(veh.heading + v_ms * math.tan(a.steering * MAX_STEER) / dyn.wheelbase * dt)
            dv = dyn.k_a * a.accel - dyn.k_b * a.brake - dyn.k_d * v_ms * v_ms
            veh.v = max(0.0, v_ms + dv * dt) * 3.6
            s_old = veh.s
            self._refresh(veh)
            ds = veh.s - s_old
            if ds < -length / 2:
                ds += length
                veh.laps += 1
            elif ds > length / 2:
                ds -= length
                veh.laps -= 1
            veh.progress += ds
            half = self.track.width / 2
            veh.offtrack_steps = veh.offtrack_steps + 1 if abs(veh.d_lat) > half else 0
            veh.reverse_steps = veh.reverse_steps + 1 if abs(veh.psi) > math.pi / 2 else 0
        self.t += 1
        return self

    # -- sensing --------------------------------------------------------

    def track_pos(self, vid: int) -> float:
        return self.vehicles[vid].d_lat / (self.track.width / 2)

    def sense(self, vid: int) -> SensorFrame:
        veh = self.vehicles.get(vid)
        if veh is None or not veh.alive:
            raise ContractViolation(f"cannot sense vehicle {vid}: missing or terminated")
        opponents = np.full(N_OPPONENTS, SENSOR_RANGE)
        others = [o for o in self.vehicles.values() if o.alive and o.id != vid]
        if others:
            dx = np.array([o.x for o in others]) - veh.x
            dy = np.array([o.y for o in others]) - veh.y
            dist = np.hypot(dx, dy)
            bearing = np.mod(np.arctan2(dy, dx) - veh.heading, 2 * math.pi)
            sector = np.minimum((bearing / (2 * math.pi / N_OPPONENTS)).astype(int), N_OPPONENTS - 1)
            near = dist < SENSOR_RANGE
            np.minimum.at(opponents, sector[near], dist[near])
        track_pos = self.track_pos(vid)
        if abs(track_pos) > 1.0:
            rays = np.full(len(TRACK_RAY_DEG), -1.0)
        else:
            rays = self.track.cast_rays(veh.x, veh.y, veh.heading + self._ray_offsets, SENSOR_RANGE)
        return SensorFrame(
            angle=veh.psi,
            opponents=opponents,
            track=rays,
            trackPos=track_pos,
            v=veh.v,
            speedY=veh.speedY,
            speedZ=veh.speedZ,
            rpm=veh.rpm,
            wheelSpinVel=np.array(veh.wheelSpinVel),
        )

    def sense_lane(self, vid: int) -> LaneFrame:
        """Cheap observation without range finders, for scripted vehicles."""
        veh = self.vehicles.get(vid)
        if veh is None or not veh.alive:
            raise ContractViolation(f"cannot sense vehicle {vid}: missing or terminated")
        return LaneFrame(veh.psi, self.track_pos(vid), veh.v)

    def relative_distance(self, a: int, b: int) -> float:
        """Sensor-range distance between two vehicles (capped, like an opponent reading)."""
        va, vb = self.vehicles[a], self.vehicles[b]
        return min(math.hypot(va.x - vb.x, va.y - vb.y), SENSOR_RANGE)

    # -- events ---------------------------------------------------------

    def check_collisions(self) -> list[CollisionEvent]:
        """New collision events since the previous call (one per contiguous contact)."""
        alive = [self.vehicles[i] for i in sorted(self.alive_ids())]
        threshold = 2 * self.cfg.vehicle_radius
        current = set()
        for i, va in enumerate(alive):
            for vb in alive[i + 1 :]:
                if math.hypot(va.x - vb.x, va.y - vb.y) < threshold:
                    current.add((va.id, vb.id))
            if abs(self.track_pos(va.id)) > 1.0:
                current.add((va.id, OFF_TRACK))
        fresh = sorted(current - self._contacts)
        self._contacts = current
        return [CollisionEvent(a, b, self.t, self.episode) for a, b in fresh]

    def episode_terminated(self, T: int | None = None) -> Verdict:
        """Apply termination rules to alive vehicles and report the global verdict."""
        cfg = self.cfg
        T = cfg.T if T is None else T
        newly = {}
        for vid in self.alive_ids():
            veh = self.vehicles[vid]
            reason = None
            if veh.progress >= self.track.length and (veh.kind is Kind.ADV or cfg.ndv_arrival):
                reason = Termination.ARRIVAL
            elif veh.reverse_steps >= cfg.reversal_steps:
                reason = Termination.REVERSAL
            elif veh.offtrack_steps > cfg.offtrack_grace:
                reason = Termination.OFF_TRACK
            elif self.t >= T:
                reason = Termination.TIME
            if reason is not None:
                veh.alive = False
                veh.termination = reason
                veh.terminated_at = self.t
                newly[vid] = reason
        if self.t >= T:
            for veh in self.vehicles.values():
                if veh.alive:
                    veh.alive, veh.termination, veh.terminated_at = False, Termination.TIME, self.t
                    newly[veh.id] = Termination.TIME
            return Verdict(True, Termination.TIME, newly)
        advs = [v for v in self.vehicles.values() if v.kind is Kind.ADV]
        if advs and not any(v.alive for v in advs):
            return Verdict(True, None, newly)
        return Verdict(False, None, newly)
