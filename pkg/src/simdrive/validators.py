"""Read-only acceptance evaluators over the vehicle trace.

Validators consume :class:`TraceSample` values, either live inside a run
(through :class:`ValidatorPart`) or offline from a recording; both paths feed
identical samples and therefore produce identical verdicts.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

from .bus import FIFOStore
from .dmcp import ConfigError, ConfigurationSet
from .dsl.geometry import distance_to_polyline
from .dsl.model import Point2
from .dsl.routing import RouteGraph, UnknownWaypoint, shortest_route
from .messages import VEHICLE_STATE_TYPE, VehicleStateMsg
from .parts import PartContext, PartKind, SystemPart

DEFAULT_PASS_RADIUS = 2.0


class ValidatorConfigError(ConfigError):
    pass


@dataclass(frozen=True)
class TraceSample:
    vehicle_id: int
    x: float
    y: float
    heading: float
    timestamp: int

    @property
    def position(self) -> Point2:
        return (self.x, self.y)

    @classmethod
    def from_msg(cls, m: VehicleStateMsg) -> "TraceSample":
        return cls(m.vehicle_id, m.x, m.y, m.heading, m.timestamp)


@dataclass(frozen=True)
class Verdict:
    validator: str
    vehicle_id: int
    passed: bool | None = None  # None while pending
    finalized_at: int | None = None
    detail: str = ""

    @property
    def final(self) -> bool:
        return self.finalized_at is not None

    def line(self) -> str:
        status = "PASSED" if self.passed else "FAILED"
        return f"VALIDATOR {self.validator} vehicle={self.vehicle_id} {status} {self.detail}".rstrip()


class Validator:
    name = "Validator"

    def __init__(self, vehicle_id: int):
        self.vehicle_id = vehicle_id
        self._verdict = Verdict(self.name, vehicle_id)
        self._last_ts: int | None = None

    @property
    def verdict(self) -> Verdict:
        return self._verdict

    @property
    def final(self) -> bool:
        return self._verdict.final

    def _finalize(self, passed: bool, at: int, detail: str) -> None:
        if not self.final:
            self._verdict = replace(self._verdict, passed=passed, finalized_at=at, detail=detail)

    def observe(self, sample: TraceSample) -> None:
        if self._last_ts is not None and sample.timestamp <= self._last_ts:
            raise ValueError(
                f"{self.name}: timestamps must increase (got {sample.timestamp} after {self._last_ts})")
        self._last_ts = sample.timestamp
        if not self.final:
            self._observe(sample)

    def finish(self, end_time: int) -> Verdict:
        """Finalize at run end; anything still pending becomes a verdict now."""
        if not self.final:
            self._finish(end_time)
        if not self.final:
            self._finalize(False, end_time, "no verdict by end of run")
        return self._verdict

    def _observe(self, sample: TraceSample) -> None:
        raise NotImplementedError

    def _finish(self, end_time: int) -> None:
        pass


class DestinationReached(Validator):
    """Passes at the first sample within ``radius`` of ``destination``."""

    name = "DestinationReached"

    def __init__(self, vehicle_id: int, destination: Point2, radius: float):
        if not radius > 0:
            raise ValidatorConfigError("destination radius must be > 0")
        super().__init__(vehicle_id)
        self.destination = (float(destination[0]), float(destination[1]))
        self.radius = radius
        self.closest = math.inf

    def _observe(self, s):
        d = math.dist(s.position, self.destination)
        self.closest = min(self.closest, d)
        if d <= self.radius:
            self._finalize(True, s.timestamp, f"reached at t={s.timestamp} distance={d:.3f}")

    def _finish(self, end_time):
        self._finalize(False, end_time, f"not reached; closest={self.closest:.3f}")


class ShortestRouteChosen(Validator):
    """Passes once every waypoint of the shortest route was approached, in order."""

    name = "ShortestRouteChosen"

    def __init__(self, vehicle_id: int, graph: RouteGraph, start: str, goal: str,
                 pass_radius: float = DEFAULT_PASS_RADIUS):
        if not pass_radius > 0:
            raise ValidatorConfigError("pass radius must be > 0")
        super().__init__(vehicle_id)
        try:
            route = shortest_route(graph, start, goal)
        except UnknownWaypoint as exc:
            raise ValidatorConfigError(str(exc)) from None
        if not route:
            raise ValidatorConfigError(f"no route from {start} to {goal}")
        self.route = route.waypoints
        self.positions = graph.polyline(route.waypoints)
        self.pass_radius = pass_radius
        self.next_index = 0

    def _observe(self, s):
        n = len(self.route)
        while self.next_index < n and math.dist(s.position, self.positions[self.next_index]) <= self.pass_radius:
            self.next_index += 1
        if self.next_index == n:
            self._finalize(True, s.timestamp, f"passed {n} waypoints")

    def _finish(self, end_time):
        wp = self.route[self.next_index]
        self._finalize(False, end_time,
                       f"waypoint {wp} not passed in order ({self.next_index}/{len(self.route)})")


class DistanceToRoute(Validator):
    """Fails at the first sample farther than ``max_deviation`` from the route polyline."""

    name = "DistanceToRoute"

    def __init__(self, vehicle_id: int, route: Sequence[Point2], max_deviation: float):
        if not max_deviation > 0:
            raise ValidatorConfigError("max deviation must be > 0")
        if len(route) < 2:
            raise ValidatorConfigError("route needs at least 2 vertices")
        super().__init__(vehicle_id)
        self.route = [(float(x), float(y)) for x, y in route]
        self.max_deviation = max_deviation
        self.worst = 0.0

    def _observe(self, s):
        d = distance_to_polyline(s.position, self.route)
        self.worst = max(self.worst, d)
        if d > self.max_deviation:
            self._finalize(False, s.timestamp,
                           f"distance={d:.3f} at ({s.x:.3f}, {s.y:.3f}) t={s.timestamp}")

    def _finish(self, end_time):
        self._finalize(True, end_time, f"worst={self.worst:.3f}")


def route_polyline(graph: RouteGraph, waypoints: Iterable[str]) -> list[Point2]:
    """Polyline through the given waypoints, filling gaps with shortest routes."""
    wps = list(waypoints)
    out: list[Point2] = []
    for a, b in zip(wps, wps[1:]):
        leg = shortest_route(graph, a, b)
        if not leg:
            raise ValidatorConfigError(f"no route from {a} to {b}")
        pts = graph.polyline(leg.waypoints)
        out.extend(pts if not out else pts[1:])
    if len(wps) == 1:
        out = graph.polyline(wps)
    return out


def _waypoint_list(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def build_suite(suite: ConfigurationSet, graph: RouteGraph, vehicle_ids: Sequence[int]) -> list[Validator]:
    """Instantiate the validators described under ``suite.*`` for each vehicle.

    Keys: ``suite.vehicles``; ``suite.destination.{waypoint|x,y}``,
    ``suite.destination.radius``; ``suite.shortestroute.{from,to,passradius}``;
    ``suite.distancetoroute.{waypoints|from,to}``, ``suite.distancetoroute.maxdeviation``.
    """
    s = suite.with_prefix("suite")
    known = ("vehicles", "destination.", "shortestroute.", "distancetoroute.")
    unknown = [k for k in s if not any(k == p or k.startswith(p) for p in known)]
    if unknown:
        raise ValidatorConfigError(f"unknown suite keys: {', '.join('suite.' + k for k in unknown)}")
    if "vehicles" in s:
        try:
            vehicle_ids = [int(v) for v in _waypoint_list(s["vehicles"])]
        except ValueError:
            raise ValidatorConfigError(f"suite.vehicles: {s['vehicles']!r}") from None

    def num(key, default=None):
        try:
            return suite.get_float("suite." + key, default)
        except ConfigError as exc:
            raise ValidatorConfigError(str(exc)) from None

    def node(key):
        if key not in s:
            raise ValidatorConfigError(f"missing configuration key 'suite.{key}'")
        wp = s[key].strip()
        if wp not in graph:
            raise ValidatorConfigError(f"suite.{key}: unknown waypoint {wp}")
        return wp

    validators: list[Validator] = []
    for vid in vehicle_ids:
        if any(k.startswith("destination.") for k in s):
            if "destination.waypoint" in s:
                dest = graph.nodes[node("destination.waypoint")]
            else:
                dest = (num("destination.x"), num("destination.y"))
            validators.append(DestinationReached(vid, dest, num("destination.radius", DEFAULT_PASS_RADIUS)))
        if any(k.startswith("shortestroute.") for k in s):
            validators.append(ShortestRouteChosen(
                vid, graph, node("shortestroute.from"), node("shortestroute.to"),
                num("shortestroute.passradius", DEFAULT_PASS_RADIUS)))
        if any(k.startswith("distancetoroute.") for k in s):
            if "distancetoroute.waypoints" in s:
                wps = _waypoint_list(s["distancetoroute.waypoints"])
                for wp in wps:
                    if wp not in graph:
                        raise ValidatorConfigError(f"suite.distancetoroute.waypoints: unknown waypoint {wp}")
                line = graph.polyline(wps)
            else:
                line = route_polyline(graph, [node("distancetoroute.from"), node("distancetoroute.to")])
            validators.append(DistanceToRoute(vid, line, num("distancetoroute.maxdeviation")))
    return validators


class ValidatorPart(SystemPart):
    """Hosts validators as a read-only observer of vehicle-state containers."""

    kind = PartKind.OBSERVER
    name = "validators"

    def __init__(self, validators: Sequence[Validator]):
        self.validators = list(validators)
        self.by_vehicle: dict[int, list[Validator]] = {}
        for v in self.validators:
            self.by_vehicle.setdefault(v.vehicle_id, []).append(v)

    def setup(self, ctx: PartContext) -> None:
        self.inbox = FIFOStore()
        ctx.bus.add_listener({VEHICLE_STATE_TYPE}, self.inbox)

    def feed(self, msg: VehicleStateMsg) -> None:
        if not msg.external:
            return
        for v in self.by_vehicle.get(msg.vehicle_id, ()):
            v.observe(TraceSample.from_msg(msg))

    def step(self, now: int) -> None:
        for c in self.inbox.drain():
            self.feed(c.unpack(VehicleStateMsg))

    def finish(self, now: int) -> None:
        self.step(now)
        for v in self.validators:
            v.finish(now)

    @property
    def all_final(self) -> bool:
        return bool(self.validators) and all(v.final for v in self.validators)

    @property
    def verdicts(self) -> list[Verdict]:
        return [v.verdict for v in self.validators]


def evaluate_recording(path, validators: Sequence[Validator]) -> list[Verdict]:
    """Run validators offline over a recording file."""
    from .recording import read_recording

    host = ValidatorPart(validators)
    end = 0
    for entry in read_recording(path):
        end = entry.timestamp
        if entry.container.data_type_id == VEHICLE_STATE_TYPE:
            host.feed(entry.container.unpack(VehicleStateMsg))
    for v in host.validators:
        v.finish(end)
    return host.verdicts
