"""Scripted controller for normal (non-learning) traffic."""

from __future__ import annotations

from dataclasses import dataclass

from ..sim import Action, DynamicsConfig, LaneFrame, SensorFrame


@dataclass(frozen=True)
class NDVController:
    target_speed: float  # km/h
    k_trackpos: float = 0.5
    k_angle: float = 1.0
    k_speed: float = 0.1
    hold_accel: float = 0.0  # throttle that balances drag at the target speed

    @classmethod
    def for_dynamics(cls, target_speed: float, dyn: DynamicsConfig, **gains) -> "NDVController":
        v_ms = target_speed / 3.6
        return cls(target_speed, hold_accel=dyn.k_d * v_ms * v_ms / dyn.k_a, **gains)

    def __call__(self, frame: SensorFrame | LaneFrame) -> Action:
        if abs(frame.trackPos) > 1.0:
            return Action(0.0, 0.0, 0.0)
        steer = -self.k_trackpos * frame.trackPos - self.k_angle * frame.angle
        err = self.target_speed - frame.v
        if err >= 0:
            accel, brake = self.hold_accel + self.k_speed * err, 0.0
        else:
            accel, brake = 0.0, -self.k_speed * err
        return Action(accel, brake, steer).clipped()
