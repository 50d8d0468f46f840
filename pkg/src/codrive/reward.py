"""Per-step reward: collision penalty, time/arrival term and on-road term.

Speeds are in km/h throughout (the raw sensor unit); only the safe-distance
formula converts, through the constants ``A`` and ``B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class RewardConfig:
    w_c: float = 0.6
    w_h: float = 0.2
    w_o: float = 0.2
    w_p: float = 1000.0
    T_s: float = 0.5  # s, emergency detection delay
    a_0: float = 3.0  # m/s^2, current deceleration
    a_max: float = 6.0  # m/s^2, maximum deceleration
    A: float = 3.6
    B: float = 25.92
    # Term multipliers. Defaults reproduce the formulas exactly as printed:
    # h = w_p*|v sin b| and o = v|trackPos| + |v sin b| - v cos b.
    sign_h_transverse: float = 1.0
    sign_o_trackpos: float = 1.0
    sign_o_transverse: float = 1.0
    sign_o_longitudinal: float = -1.0

    def validate(self) -> "RewardConfig":
        for name in ("w_c", "w_h", "w_o"):
            w = getattr(self, name)
            if not 0.0 <= w <= 1.0:
                raise ConfigError(f"{name}={w} outside [0, 1]")
        if abs(self.w_c + self.w_h + self.w_o - 1.0) > 1e-9:
            raise ConfigError(f"reward weights sum to {self.w_c + self.w_h + self.w_o}, expected 1")
        if self.a_0 == 0 or self.a_max == 0:
            raise ConfigError("deceleration a_0 / a_max must be nonzero (safe distance divides by them)")
        if not 0 < abs(self.a_0) <= abs(self.a_max):
            raise ConfigError("need 0 < |a_0| <= |a_max|")
        if self.T_s < 0:
            raise ConfigError("T_s must be nonnegative")
        if abs(self.B - 2 * self.A**2) > 1e-9:
            raise ConfigError(f"B={self.B} inconsistent with A={self.A} (expected 2*A^2)")
        return self


@dataclass(frozen=True)
class RewardBreakdown:
    c: float
    h: float
    o: float
    r: float


def safe_distance(v: float, cfg: RewardConfig) -> float:
    """Speed-dependent minimum gap in meters; ``v`` in km/h."""
    if v < 0:
        raise ValueError(f"speed must be nonnegative, got {v}")
    if cfg.a_0 == 0 or cfg.a_max == 0:
        raise ConfigError("deceleration a_0 / a_max must be nonzero")
    return cfg.T_s * v / cfg.A + v * v / (cfg.B * abs(cfg.a_0)) - v * v / (cfg.B * abs(cfg.a_max))


def collision_term(d: float, d_min: float, cfg: RewardConfig) -> float:
    if d <= d_min:
        return -(d_min - d) * cfg.w_p
    return 0.0


def time_term(arrived: bool, v: float, beta: float, cfg: RewardConfig) -> float:
    if arrived:
        return 10.0 * cfg.w_p
    return cfg.sign_h_transverse * cfg.w_p * abs(v * math.sin(beta))


def on_road_term(v: float, beta: float, track_pos: float, cfg: RewardConfig) -> float:
    return (
        cfg.sign_o_trackpos * v * abs(track_pos)
        + cfg.sign_o_transverse * abs(v * math.sin(beta))
        + cfg.sign_o_longitudinal * v * math.cos(beta)
    )


def total_reward(c: float, h: float, o: float, cfg: RewardConfig) -> RewardBreakdown:
    return RewardBreakdown(c, h, o, cfg.w_c * c + cfg.w_h * h + cfg.w_o * o)


def step_reward(frame, arrived: bool, cfg: RewardConfig) -> RewardBreakdown:
    """Reward for one vehicle from its sensor frame.

    The collision distance is the nearest opponent reading and the heading
    angle is the frame's ``angle`` channel.
    """
    d = float(np.min(frame.opponents))
    d_min = safe_distance(frame.v, cfg)
    c = collision_term(d, d_min, cfg)
    h = time_term(arrived, frame.v, frame.angle, cfg)
    o = on_road_term(frame.v, frame.angle, frame.trackPos, cfg)
    return total_reward(c, h, o, cfg)
