"""Closed 2D tracks built from straight and circular-arc centerline segments."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def wrap_angle(a: float) -> float:
    """Wrap an angle into (-pi, pi]."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a <= 0.0:
        a += 2.0 * math.pi
    return a - math.pi


@dataclass(frozen=True)
class Straight:
    s0: float
    length: float
    x0: float
    y0: float
    heading: float

    @property
    def direction(self) -> tuple[float, float]:
        return math.cos(self.heading), math.sin(self.heading)

    def pose(self, u: float) -> tuple[float, float, float]:
        cx, cy = self.direction
        return self.x0 + u * cx, self.y0 + u * cy, self.heading

    def curvature(self) -> float:
        return 0.0

    def project(self, x: float, y: float) -> tuple[float, float, float]:
        """Return (local arclength, signed lateral offset, distance to piece)."""
        cx, cy = self.direction
        dx, dy = x - self.x0, y - self.y0
        u = dx * cx + dy * cy
        lat = -dx * cy + dy * cx
        if u < 0.0:
            dist = math.hypot(dx, dy)
            u = 0.0
        elif u > self.length:
            dist = math.hypot(dx - self.length * cx, dy - self.length * cy)
            u = self.length
        else:
            dist = abs(lat)
        return u, lat, dist


@dataclass(frozen=True)
class Arc:
    """Circular arc; ``sweep`` > 0 turns left (counterclockwise)."""

    s0: float
    radius: float
    sweep: float
    cx: float
    cy: float
    phi0: float

    @property
    def length(self) -> float:
        return self.radius * abs(self.sweep)

    @property
    def turn(self) -> float:
        return 1.0 if self.sweep > 0 else -1.0

    def pose(self, u: float) -> tuple[float, float, float]:
        phi = self.phi0 + self.turn * u / self.radius
        x = self.cx + self.radius * math.cos(phi)
        y = self.cy + self.radius * math.sin(phi)
        return x, y, wrap_angle(phi + self.turn * math.pi / 2)

    def curvature(self) -> float:
        return self.turn / self.radius

    def project(self, x: float, y: float) -> tuple[float, float, float]:
        dx, dy = x - self.cx, y - self.cy
        rho = math.hypot(dx, dy)
        # angle travelled from the start point, in the direction of travel
        rel = (math.atan2(dy, dx) - self.phi0) * self.turn
        rel = rel % (2.0 * math.pi)
        span = abs(self.sweep)
        if rel <= span:
            u = rel * self.radius
            lat = (self.radius - rho) * self.turn
            return u, lat, abs(rho - self.radius)
        # outside the angular span: snap to the closer endpoint
        best = None
        for u in (0.0, self.length):
            px, py, h = self.pose(u)
            ex, ey = x - px, y - py
            lat = -ex * math.sin(h) + ey * math.cos(h)
            d = math.hypot(ex, ey)
            if best is None or d < best[2]:
                best = (u, lat, d)
        return best


Segment = Straight | Arc


class Track:
    """Closed centerline of constant width, parameterized by arclength.

    Segments are given as ``("straight", length)`` or ``("arc", radius, sweep)``
    with sweep in radians (positive turns left). The first segment starts at the
    origin heading along +x.
    """

    def __init__(self, pieces: list[tuple], width: float, closure_tol: float = 1e-6):
        if width <= 0:
            raise ValueError(f"track width must be positive, got {width}")
        self.width = float(width)
        self.segments: list[Segment] = []
        x = y = h = 0.0
        s = 0.0
        for piece in pieces:
            kind = piece[0]
            if kind == "straight":
                seg = Straight(s, float(piece[1]), x, y, h)
            elif kind == "arc":
                radius, sweep = float(piece[1]), float(piece[2])
                if radius <= width / 2:
                    raise ValueError("arc radius must exceed half the track width")
                turn = 1.0 if sweep > 0 else -1.0
                cx = x - turn * radius * math.sin(h)
                cy = y + turn * radius * math.cos(h)
                phi0 = math.atan2(y - cy, x - cx)
                seg = Arc(s, radius, sweep, cx, cy, phi0)
            else:
                raise ValueError(f"unknown segment kind {kind!r}")
            self.segments.append(seg)
            x, y, h = seg.pose(seg.length)
            s += seg.length
        self.length = s
        gap = math.hypot(x, y)
        if gap > closure_tol or abs(wrap_angle(h)) > closure_tol:
            raise ValueError(f"track does not close (gap {gap:.3g} m, heading {wrap_angle(h):.3g} rad)")
        self._starts = np.array([seg.s0 for seg in self.segments])
        self._edges = self._build_edges()

    # -- centerline -----------------------------------------------------

    def _segment_at(self, s: float) -> Segment:
        s = s % self.length
        i = int(np.searchsorted(self._starts, s, side="right")) - 1
        return self.segments[max(i, 0)]

    def pose(self, s: float) -> tuple[float, float, float]:
        """(x, y, tangent heading) of the centerline at arclength s."""
        s = s % self.length
        seg = self._segment_at(s)
        return seg.pose(s - seg.s0)

    def position(self, s: float) -> tuple[float, float]:
        x, y, _ = self.pose(s)
        return x, y

    def curvature(self, s: float) -> float:
        return self._segment_at(s).curvature()

    def to_xy(self, s: float, d_lat: float) -> tuple[float, float, float]:
        """Planar point at arclength s and lateral offset d_lat (left positive)."""
        x, y, h = self.pose(s)
        return x - d_lat * math.sin(h), y + d_lat * math.cos(h), h

    def project(self, x: float, y: float) -> tuple[float, float]:
        """Nearest centerline point: returns (s, signed lateral offset)."""
        best = None
        for seg in self.segments:
            u, lat, dist = seg.project(x, y)
            if best is None or dist < best[2] - 1e-12:
                best = (seg.s0 + u, lat, dist)
        return float(best[0] % self.length), float(best[1])

    # -- edges and rays -------------------------------------------------

    def _build_edges(self) -> dict:
        half = self.width / 2
        lines, circles = [], []
        for seg in self.segments:
            if isinstance(seg, Straight):
                cx, cy = seg.direction
                nx, ny = -cy, cx
                for side in (1.0, -1.0):
                    ax, ay = seg.x0 + side * half * nx, seg.y0 + side * half * ny
                    lines.append((ax, ay, seg.length * cx, seg.length * cy))
            else:
                for side in (1.0, -1.0):
                    r = seg.radius - seg.turn * side * half
                    lo = seg.phi0 if seg.turn > 0 else seg.phi0 + seg.sweep
                    circles.append((seg.cx, seg.cy, r, lo, abs(seg.sweep)))
        # columns as (n_edges, 1) so they broadcast against (n_rays,)
        as_cols = lambda rows, k: np.array(rows, dtype=float).reshape(-1, k).T[:, :, None]
        return {"lines": as_cols(lines, 4), "circles": as_cols(circles, 5)}

    def cast_rays(self, x: float, y: float, angles: np.ndarray, max_range: float = 200.0) -> np.ndarray:
        """Distance along each absolute ray angle to the nearest track edge, capped."""
        ux, uy = np.cos(angles)[None, :], np.sin(angles)[None, :]
        best = np.full(angles.shape, np.inf)
        ax, ay, ex, ey = self._edges["lines"]
        if ax.size:
            denom = ux * ey - uy * ex
            ok = np.abs(denom) > 1e-12
            safe = np.where(ok, denom, 1.0)
            wx, wy = ax - x, ay - y
            t = (wx * ey - wy * ex) / safe
            q = (wx * uy - wy * ux) / safe
            hit = ok & (t >= 0) & (q >= 0) & (q <= 1)
            best = np.minimum(best, np.where(hit, t, np.inf).min(axis=0))
        ccx, ccy, r, lo, span = self._edges["circles"]
        if ccx.size:
            px, py = x - ccx, y - ccy
            b = ux * px + uy * py
            c = px * px + py * py - r * r
            disc = b * b - c
            real = disc >= 0
            root = np.sqrt(np.where(real, disc, 0.0))
            for t in (-b - root, -b + root):
                hx, hy = px + t * ux, py + t * uy
                rel = (np.arctan2(hy, hx) - lo) % (2 * math.pi)
                hit = real & (t >= 0) & (rel <= span + 1e-12)
                best = np.minimum(best, np.where(hit, t, np.inf).min(axis=0))
        return np.minimum(best, max_range)


def oval(length: float = 800.0, width: float = 12.0, radius: float = 60.0) -> Track:
    """Stadium-shaped track: two straights joined by two semicircles."""
    straight = (length - 2 * math.pi * radius) / 2
    if straight <= 0:
        raise ValueError("oval radius too large for the requested length")
    return Track(
        [("straight", straight), ("arc", radius, math.pi), ("straight", straight), ("arc", radius, math.pi)],
        width,
    )


def road_course(length: float = 3186.0, width: float = 15.0) -> Track:
    """Rounded-rectangle course with an S-bend on each short side.

    Stands in for a real road-racing track of the given length; it mixes long
    straights, 90 degree corners and direction changes.
    """
    r_corner, r_s, alpha = 50.0, 100.0, math.pi / 6
    corners = 2 * math.pi * r_corner
    s_bends = 2 * 4 * r_s * alpha
    long_side = 800.0
    short_side = (length - corners - s_bends) / 2 - long_side
    if short_side <= 0:
        raise ValueError("course length too short for its fixed features")
    half = short_side / 2
    s_bend = [("arc", r_s, alpha), ("arc", r_s, -2 * alpha), ("arc", r_s, alpha)]
    corner = ("arc", r_corner, math.pi / 2)
    pieces = (
        [("straight", long_side), corner, ("straight", half), *s_bend, ("straight", half), corner]
        + [("straight", long_side), corner, ("straight", half), *s_bend, ("straight", half), corner]
    )
    return Track(pieces, width)
