"""Vehicle motion: kinematic bicycle for driven vehicles, polyline follower for scripted traffic."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .dmcp import ConfigurationSet
from .dsl.geometry import Pose
from .dsl.model import Point2

MAX_DT = 0.1


@dataclass(frozen=True)
class VehicleParams:
    wheelbase: float = 2.65
    max_steering: float = 0.5
    max_accel: float = 4.0
    max_decel: float = 8.0

    @classmethod
    def from_config(cls, config: ConfigurationSet) -> "VehicleParams":
        d = cls()
        return cls(
            wheelbase=config.get_float("vehicle.wheelbase", d.wheelbase),
            max_steering=config.get_float("vehicle.maxsteering", d.max_steering),
            max_accel=config.get_float("vehicle.maxaccel", d.max_accel),
            max_decel=config.get_float("vehicle.maxdecel", d.max_decel),
        )


DEFAULT_PARAMS = VehicleParams()


@dataclass(frozen=True)
class VehicleState:
    x: float = 0.0
    y: float = 0.0
    heading: float = 0.0
    speed: float = 0.0
    steering: float = 0.0
    timestamp: int = 0  # simulation µs

    @property
    def pose(self) -> Pose:
        return Pose(self.x, self.y, self.heading)


@dataclass(frozen=True)
class VehicleCommand:
    acceleration: float = 0.0
    steering: float = 0.0


def normalize_angle(a: float) -> float:
    """Map an angle to (-pi, pi]."""
    r = math.remainder(a, 2 * math.pi)
    return math.pi if r == -math.pi else r


def clamp_command(cmd: VehicleCommand, params: VehicleParams = DEFAULT_PARAMS) -> VehicleCommand:
    return VehicleCommand(
        min(params.max_accel, max(-params.max_decel, cmd.acceleration)),
        min(params.max_steering, max(-params.max_steering, cmd.steering)),
    )


def step_kinematic(state: VehicleState, command: VehicleCommand, dt: float,
                   params: VehicleParams = DEFAULT_PARAMS) -> VehicleState:
    """One forward-Euler step of the kinematic bicycle model.

    The steering setpoint is applied instantly (no actuator lag); speed is
    floored at zero, so braking never drives the vehicle backwards.
    """
    if not 0 < dt <= MAX_DT:
        raise ValueError(f"dt must be in (0, {MAX_DT}] s, got {dt}")
    values = (state.x, state.y, state.heading, state.speed, state.steering, command.acceleration, command.steering)
    if not all(math.isfinite(v) for v in values):
        raise ValueError(f"non-finite vehicle state or command: {state}, {command}")
    cmd = clamp_command(command, params)
    v = state.speed
    theta = state.heading
    x = state.x + v * math.cos(theta) * dt
    y = state.y + v * math.sin(theta) * dt
    theta = normalize_angle(theta + v / params.wheelbase * math.tan(cmd.steering) * dt)
    v = max(0.0, v + cmd.acceleration * dt)
    return VehicleState(x, y, theta, v, cmd.steering, state.timestamp + round(dt * 1e6))


# -- scripted traffic ---------------------------------------------------------

class PolylinePath:
    """Arc-length parametrized polyline."""

    def __init__(self, points: Sequence[Point2]):
        if len(points) < 1:
            raise ValueError("route polyline needs at least one point")
        self.points = [(float(x), float(y)) for x, y in points]
        self.cumulative = [0.0]
        for a, b in zip(self.points, self.points[1:]):
            self.cumulative.append(self.cumulative[-1] + math.dist(a, b))
        self.length = self.cumulative[-1]

    def pose_at(self, s: float) -> Pose:
        pts, cum = self.points, self.cumulative
        if len(pts) == 1:
            return Pose(*pts[0], 0.0)
        s = min(max(s, 0.0), self.length)
        # index of the segment containing s; the last segment owns s == length
        i = min(bisect.bisect_right(cum, s) - 1, len(pts) - 2)
        while i > 0 and cum[i + 1] == cum[i]:
            i -= 1  # skip zero-length segments at the end
        while i < len(pts) - 2 and cum[i + 1] == cum[i]:
            i += 1
        (ax, ay), (bx, by) = pts[i], pts[i + 1]
        seg = cum[i + 1] - cum[i]
        heading = math.atan2(by - ay, bx - ax) if seg > 0 else 0.0
        if s >= cum[i + 1]:
            return Pose(bx, by, heading)
        t = (s - cum[i]) / seg if seg > 0 else 0.0
        return Pose(ax + t * (bx - ax), ay + t * (by - ay), heading)


class ScriptedDriver:
    """Constant-speed follower of a waypoint route (the PointIdDriver behavior).

    ``trigger`` is polled every step until it returns True; the driver then
    moves ``speed * dt`` along the route each step and halts for good at
    ``stop_at`` (arc length, default: end of route).  Traffic controls are
    ignored.
    """

    def __init__(self, object_id: int, path: PolylinePath, speed: float,
                 trigger: Callable[[], bool] | None = None, stop_at: float | None = None):
        self.object_id = object_id
        self.path = path
        self.speed = speed
        self.trigger = trigger
        self.stop_at = path.length if stop_at is None else min(stop_at, path.length)
        self.s = 0.0
        self.started = trigger is None
        self.halted = False
        self.pose = path.pose_at(0.0)

    @property
    def moving(self) -> bool:
        return self.started and not self.halted

    def step(self, dt: float) -> Pose:
        if not self.started and self.trigger():
            self.started = True
        if self.moving:
            self.s = min(self.s + self.speed * dt, self.stop_at)
            if self.s >= self.stop_at:
                self.halted = True
            self.pose = self.path.pose_at(self.s)
        return self.pose

    def state(self, timestamp: int) -> VehicleState:
        # speed reported is the configured speed while the object advances
        return VehicleState(self.pose.x, self.pose.y, self.pose.heading,
                            self.speed if self.moving else 0.0, 0.0, timestamp)


def step_scripted_object(path: PolylinePath, s: float, speed: float, dt: float) -> tuple[float, Pose]:
    """Advance ``speed * dt`` along ``path`` from arc length ``s``."""
    s = min(s + speed * dt, path.length)
    return s, path.pose_at(s)
