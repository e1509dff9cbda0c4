"""Reference SUT parts and the registry ``simrun`` resolves ``sim.sut`` against."""
from __future__ import annotations

import importlib
import math
from typing import Callable

from .bus import FIFOStore
from .dmcp import ConfigError
from .dsl.geometry import closest_point_on_segment
from .dsl.routing import RouteGraph, shortest_route
from .messages import VEHICLE_STATE_TYPE, VehicleCommandMsg, VehicleStateMsg
from .parts import PartContext, PartKind, SystemPart
from .serialization import pack
from .vehicle import PolylinePath, VehicleParams, VehicleState, normalize_angle

# how far ahead of the current arc length the progress search may jump, m
_SEARCH_WINDOW = 15.0


def nearest_waypoint(graph: RouteGraph, x: float, y: float) -> str:
    return min(sorted(graph.nodes), key=lambda wp: math.dist(graph.nodes[wp], (x, y)))


def plan_route(graph: RouteGraph, start: str, goals: list[str]) -> list[str]:
    """Chain shortest routes ``start -> goals[0] -> goals[1] ...``."""
    out = [start]
    for goal in goals:
        leg = shortest_route(graph, out[-1], goal)
        if not leg:
            raise ConfigError(f"no route from {out[-1]} to {goal}")
        out.extend(leg.waypoints[1:])
    return out


class RouteFollower(SystemPart):
    """Pure-pursuit driver along the shortest route to ``follower.destination``.

    Config (delivered by DMCP): ``follower.destination`` (waypoint, required),
    ``follower.via`` (comma-separated waypoints), ``follower.speed`` (m/s),
    ``follower.lookahead`` (m), ``follower.decel`` (m/s², comfort braking).
    The route starts at the waypoint nearest to the first observed pose.
    """

    kind = PartKind.SUT
    name = "follower"

    def setup(self, ctx: PartContext) -> None:
        cfg = ctx.config
        if ctx.graph is None or ctx.vehicle_id is None:
            raise ConfigError("follower needs a scenario and a vehicle")
        if "follower.destination" not in cfg:
            raise ConfigError("follower.destination is not configured")
        self.graph = ctx.graph
        self.vehicle_id = ctx.vehicle_id
        self.bus = ctx.bus
        self.params = VehicleParams.from_config(cfg)
        via = [v.strip() for v in cfg.get("follower.via", "").split(",") if v.strip()]
        self.goals = via + [cfg["follower.destination"].strip()]
        for wp in self.goals:
            if wp not in self.graph:
                raise ConfigError(f"follower: unknown waypoint {wp}")
        self.cruise = cfg.get_float("follower.speed", 8.0)
        self.lookahead = cfg.get_float("follower.lookahead", 6.0)
        self.decel = cfg.get_float("follower.decel", 2.0)
        self.route: list[str] | None = None
        self.path: PolylinePath | None = None
        self.s = 0.0
        self.inbox = FIFOStore()
        ctx.bus.add_listener({VEHICLE_STATE_TYPE}, self.inbox)

    def _latest_state(self) -> VehicleState | None:
        latest = None
        for c in self.inbox.drain():
            m = c.unpack(VehicleStateMsg)
            if m.vehicle_id == self.vehicle_id:
                latest = m.to_state()
        return latest

    def _progress(self, x: float, y: float) -> float:
        """Arc length of the closest path point, searched forward from the last one."""
        path = self.path
        best, best_s = math.inf, self.s
        for i in range(len(path.points) - 1):
            s0, s1 = path.cumulative[i], path.cumulative[i + 1]
            if s1 < self.s or s0 > self.s + _SEARCH_WINDOW:
                continue
            a, b = path.points[i], path.points[i + 1]
            px, py = closest_point_on_segment((x, y), a, b)
            d = math.dist((x, y), (px, py))
            if d < best:
                best, best_s = d, s0 + math.dist(a, (px, py))
        return max(best_s, self.s)

    def command(self, state: VehicleState) -> tuple[float, float]:
        if self.path is None:
            start = nearest_waypoint(self.graph, state.x, state.y)
            self.route = plan_route(self.graph, start, self.goals)
            self.path = PolylinePath(self.graph.polyline(self.route))
        self.s = self._progress(state.x, state.y)
        remaining = self.path.length - self.s
        tx, ty, _ = self.path.pose_at(self.s + self.lookahead)
        ld = math.dist((state.x, state.y), (tx, ty))
        if ld < 1e-6:
            steering = 0.0
        else:
            alpha = normalize_angle(math.atan2(ty - state.y, tx - state.x) - state.heading)
            steering = math.atan2(2 * self.params.wheelbase * math.sin(alpha), ld)
        # slow down for the turn ahead and stop at the end of the route
        _, _, h_near = self.path.pose_at(self.s)
        _, _, h_far = self.path.pose_at(self.s + 2 * self.lookahead)
        turn = abs(normalize_angle(h_far - h_near))
        target = self.cruise * (1 - 0.5 * min(turn / (math.pi / 2), 1.0))
        target = min(target, math.sqrt(2 * self.decel * max(remaining - 0.5, 0.0)))
        accel = 2.0 * (target - state.speed)
        if remaining < 0.5:
            accel = -self.params.max_decel
        return accel, steering

    def step(self, now: int) -> None:
        state = self._latest_state()
        if state is None:
            return
        accel, steering = self.command(state)
        self.bus.send(pack(VehicleCommandMsg(self.vehicle_id, accel, steering), now))


class Idle(SystemPart):
    """SUT stub that never commands anything."""

    kind = PartKind.SUT
    name = "idle"


BUILTIN_SUTS: dict[str, Callable[[], SystemPart]] = {
    "follower": RouteFollower,
    "idle": Idle,
}


def resolve_sut(name: str) -> Callable[[], SystemPart]:
    """A built-in name or ``package.module:attr`` naming a SystemPart factory."""
    if name in BUILTIN_SUTS:
        return BUILTIN_SUTS[name]
    if ":" not in name:
        raise ConfigError(f"unknown SUT {name!r}; built-ins are {', '.join(sorted(BUILTIN_SUTS))}")
    module, _, attr = name.partition(":")
    try:
        return getattr(importlib.import_module(module), attr)
    except (ImportError, AttributeError) as exc:
        raise ConfigError(f"cannot load SUT {name!r}: {exc}") from None
