"""Simulated system context: vehicle poses plus the parts that advance and sense them."""
from __future__ import annotations

import math

import numpy as np

from .bus import FIFOStore
from .dmcp import ConfigurationSet
from .dsl.geometry import OBJECT_HEIGHT, Pose, ground_segments, point_in_polygon, rectangle_corners
from .dsl.model import ExternalDriver, OnEnteringPolygon, OnMoving, OnReachingPoint, PointIdDriver, Scenario, Situation
from .dsl.routing import RouteGraph, waypoint_sort_key
from .messages import VEHICLE_COMMAND_TYPE, VehicleCommandMsg, VehicleStateMsg
from .parts import PartContext, PartKind, SystemPart
from .sensors import ScanMsg, ScannerMount, mounts_from_config, scan, segments_array
from .serialization import pack
from .vehicle import (
    PolylinePath, ScriptedDriver, VehicleCommand, VehicleParams, VehicleState, step_kinematic,
)


class SetupError(Exception):
    """The run cannot start: bad models, configuration or part wiring."""


class World:
    """Poses of every situation object; mutated only by the vehicle context."""

    def __init__(self, scenario: Scenario, situation: Situation | None, graph: RouteGraph | None = None):
        self.scenario = scenario
        self.situation = situation
        self.graph = graph if graph is not None else RouteGraph.from_scenario(scenario)
        self.static = segments_array(ground_segments(scenario))
        self.external: dict[int, VehicleState] = {}
        self.scripted: dict[int, ScriptedDriver] = {}
        self.shapes = {}
        if situation is None:
            return
        for obj in sorted(situation.objects, key=lambda o: o.id):
            self.shapes[obj.id] = obj.shape
            b = obj.behavior
            if isinstance(b, ExternalDriver):
                x, y = self.graph.nodes[b.start]
                heading = b.heading if b.heading is not None else self._lane_heading(b.start)
                self.external[obj.id] = VehicleState(x, y, heading)
            elif isinstance(b, PointIdDriver):
                path = PolylinePath(self.graph.polyline(b.route))
                stop_at = None
                if isinstance(obj.stop, OnReachingPoint):
                    stop_at = path.cumulative[b.route.index(obj.stop.waypoint)]
                self.scripted[obj.id] = ScriptedDriver(obj.id, path, b.speed, self._trigger(obj.start), stop_at)

    def _lane_heading(self, wp: str) -> float:
        succ = sorted(self.graph.successors(wp), key=waypoint_sort_key)
        if not succ:
            return 0.0
        (x0, y0), (x1, y1) = self.graph.nodes[wp], self.graph.nodes[succ[0]]
        return math.atan2(y1 - y0, x1 - x0)

    def _trigger(self, cond):
        if isinstance(cond, OnMoving):
            return lambda: self.speed_of(cond.object_id) > 0
        if isinstance(cond, OnEnteringPolygon):
            poly = self.scenario.polygon(cond.polygon_id)
            return lambda: point_in_polygon(self.pose_of(cond.object_id)[:2], poly.vertices)
        return None

    def pose_of(self, object_id: int) -> Pose:
        if object_id in self.external:
            return self.external[object_id].pose
        return self.scripted[object_id].pose

    def speed_of(self, object_id: int) -> float:
        if object_id in self.external:
            return self.external[object_id].speed
        d = self.scripted[object_id]
        return d.speed if d.moving else 0.0

    def poses(self) -> dict[int, Pose]:
        return {oid: self.pose_of(oid) for oid in sorted(self.shapes)}

    def obstacles_for(self, vehicle_id: int | None) -> np.ndarray:
        """Static segments plus every other object's footprint, as an (n, 5) array."""
        rows = []
        for oid in sorted(self.shapes):
            if oid == vehicle_id:
                continue
            c = rectangle_corners(self.shapes[oid], self.pose_of(oid))
            for i in range(4):
                rows.append((*c[i], *c[(i + 1) % 4], OBJECT_HEIGHT))
        if not rows:
            return self.static
        return np.concatenate((self.static, np.array(rows, dtype=float)))


class VehicleContext(SystemPart):
    """Integrates SUT vehicles from their latest command and moves scripted traffic.

    Publishes one vehicle-state container per object per slice.
    """

    kind = PartKind.CONTEXT
    name = "vehiclecontext"

    def setup(self, ctx: PartContext) -> None:
        self.world = ctx.world
        self.bus = ctx.bus
        self.dt = ctx.clock.step / 1e6
        self.params = VehicleParams.from_config(ctx.config)
        self.commands: dict[int, VehicleCommand] = {}
        self.inbox = FIFOStore()
        ctx.bus.add_listener({VEHICLE_COMMAND_TYPE}, self.inbox)

    def step(self, now: int) -> None:
        w = self.world
        for c in self.inbox.drain():
            m = c.unpack(VehicleCommandMsg)
            if m.vehicle_id in w.external:
                self.commands[m.vehicle_id] = m.to_command()
        if now > 0:
            for vid, state in w.external.items():
                w.external[vid] = step_kinematic(state, self.commands.get(vid, VehicleCommand()), self.dt, self.params)
            for driver in w.scripted.values():
                driver.step(self.dt)
        for oid in sorted(w.shapes):
            if oid in w.external:
                s = w.external[oid]
                if s.timestamp != now:
                    s = w.external[oid] = VehicleState(s.x, s.y, s.heading, s.speed, s.steering, now)
                msg = VehicleStateMsg.from_state(oid, s, True)
            else:
                msg = VehicleStateMsg.from_state(oid, w.scripted[oid].state(now), False)
            self.bus.send(pack(msg, now))


class SensorContext(SystemPart):
    """Scans for every SUT vehicle with the mounts configured under ``scanner.*``."""

    kind = PartKind.CONTEXT
    name = "sensorcontext"

    def __init__(self, mounts: list[ScannerMount] | None = None, noise_sigma: float | None = None):
        self.mounts = mounts
        self.noise_sigma = noise_sigma

    def setup(self, ctx: PartContext) -> None:
        self.world = ctx.world
        self.bus = ctx.bus
        self.rng = ctx.rng
        cfg: ConfigurationSet = ctx.config
        if self.mounts is None:
            self.mounts = mounts_from_config(cfg)
        if self.noise_sigma is None:
            self.noise_sigma = cfg.get_float("sim.noise", 0.0)

    def step(self, now: int) -> None:
        if not self.mounts:
            return
        w = self.world
        for vid in sorted(w.external):
            obstacles = w.obstacles_for(vid)
            pose = w.external[vid].pose
            for i, mount in enumerate(self.mounts):
                result = scan(obstacles, pose, mount, now, self.noise_sigma, self.rng)
                self.bus.send(ScanMsg.pack_result(vid, i, result, now))
