"""Semantic checks for parsed scenarios and situations."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Union

from .model import (
    Cylinder, ExternalDriver, OnEnteringPolygon, OnMoving, OnReachingPoint, PointIdDriver, Polygon, Scenario,
    Situation,
)


@dataclass(frozen=True)
class SemanticError:
    rule: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.rule}: {self.subject}: {self.message}"


def _duplicates(ids: Iterable) -> list:
    return [i for i, n in Counter(ids).items() if n > 1]


def validate_scenario(s: Scenario) -> list[SemanticError]:
    errors: list[SemanticError] = []

    def err(rule, subject, message):
        errors.append(SemanticError(rule, subject, message))

    for d in _duplicates(g.id for g in s.ground):
        err("duplicate-id", f"ground {d}", "ground shape id used more than once")
    for g in s.ground:
        if isinstance(g, Polygon):
            if len(g.vertices) < 3:
                err("polygon-vertices", f"polygon {g.id}", f"needs at least 3 vertices, has {len(g.vertices)}")
            if g.height < 0:
                err("negative-height", f"polygon {g.id}", f"height {g.height} < 0")
        elif isinstance(g, Cylinder):
            if g.radius <= 0:
                err("cylinder-radius", f"cylinder {g.id}", f"radius {g.radius} must be > 0")
            if g.height < 0:
                err("negative-height", f"cylinder {g.id}", f"height {g.height} < 0")

    for d in _duplicates(layer.id for layer in s.layers):
        err("duplicate-id", f"layer {d}", "layer id used more than once")
    for layer in s.layers:
        for d in _duplicates(r.id for r in layer.roads):
            err("duplicate-id", f"road {layer.id}.{d}", "road id used more than once in layer")
        for road in layer.roads:
            for d in _duplicates(lane.id for lane in road.lanes):
                err("duplicate-id", f"lane {layer.id}.{road.id}.{d}", "lane id used more than once in road")

    positions: dict[str, tuple[float, float]] = {}
    for prefix, lane in s.lanes():
        for d in _duplicates(p.id for p in lane.points):
            err("duplicate-id", f"waypoint {prefix}.{d}", "waypoint id used more than once in lane")
        if len(lane.points) < 2:
            err("lane-points", f"lane {prefix}", f"needs at least 2 waypoints, has {len(lane.points)}")
        if lane.width <= 0:
            err("lane-width", f"lane {prefix}", f"width {lane.width} must be > 0")
        if lane.speed_limit is not None and lane.speed_limit <= 0:
            err("speed-limit", f"lane {prefix}", f"speed limit {lane.speed_limit} must be > 0")
        for a, b in zip(lane.points, lane.points[1:]):
            if a.position == b.position:
                err("zero-length-edge", f"waypoint {prefix}.{b.id}", f"coincides with {prefix}.{a.id}")
        for p in lane.points:
            positions.setdefault(f"{prefix}.{p.id}", p.position)

    for prefix, lane in s.lanes():
        for c in lane.connectors:
            missing = [wp for wp in (c.source, c.target) if wp not in positions]
            for wp in missing:
                err("dangling-connector", f"connector {c.source} -> {c.target}", f"waypoint {wp} does not exist")
            if not missing and positions[c.source] == positions[c.target]:
                err("zero-length-edge", f"connector {c.source} -> {c.target}", "endpoints coincide")
        for t in lane.traffic_controls:
            if t.waypoint not in positions:
                err("dangling-reference", f"stopsign in lane {prefix}", f"waypoint {t.waypoint} does not exist")

    for d in _duplicates(z.id for z in s.zones):
        err("duplicate-id", f"zone {d}", "zone id used more than once")
    for z in s.zones:
        for wp in z.perimeter:
            if wp not in positions:
                err("dangling-reference", f"zone {z.id}", f"perimeter waypoint {wp} does not exist")
        for d in _duplicates(sp.id for sp in z.spots):
            err("duplicate-id", f"spot {z.id}.{d}", "spot id used more than once in zone")
    return errors


def validate_situation(sit: Situation, scenario: Scenario | None = None) -> list[SemanticError]:
    errors: list[SemanticError] = []

    def err(rule, subject, message):
        errors.append(SemanticError(rule, subject, message))

    waypoints = scenario.waypoint_positions() if scenario is not None else None
    polygons = {g.id for g in scenario.ground if isinstance(g, Polygon)} if scenario is not None else None
    if scenario is not None and sit.scenario != scenario.name:
        err("scenario-ref", f"situation {sit.name}", f"refers to scenario {sit.scenario!r}, loaded {scenario.name!r}")

    for d in _duplicates(o.id for o in sit.objects):
        err("duplicate-id", f"object {d}", "object id used more than once")
    object_ids = {o.id for o in sit.objects}

    def check_wp(subject, wp):
        if waypoints is not None and wp not in waypoints:
            err("dangling-reference", subject, f"waypoint {wp} does not exist")

    for o in sit.objects:
        subject = f"object {o.id}"
        if not (o.shape.length > 0 and o.shape.width > 0):
            err("shape-size", subject, "rectangle length and width must be > 0")
        b = o.behavior
        if isinstance(b, PointIdDriver):
            if len(b.route) < 2:
                err("route-length", subject, "route needs at least 2 waypoints")
            if not (b.speed > 0 and math.isfinite(b.speed)):
                err("speed", subject, f"speed {b.speed} must be > 0")
            for wp in b.route:
                check_wp(subject, wp)
            if isinstance(o.stop, OnReachingPoint) and o.stop.waypoint not in b.route:
                err("stop-point", subject, f"stop waypoint {o.stop.waypoint} is not on the route")
        elif isinstance(b, ExternalDriver):
            check_wp(subject, b.start)
        st = o.start
        if isinstance(st, (OnMoving, OnEnteringPolygon)):
            if st.object_id not in object_ids:
                err("dangling-reference", subject, f"start condition refers to unknown object {st.object_id}")
            elif st.object_id == o.id:
                err("self-reference", subject, "start condition refers to the object itself")
        if isinstance(st, OnEnteringPolygon) and polygons is not None and st.polygon_id not in polygons:
            err("dangling-reference", subject, f"start condition refers to unknown polygon {st.polygon_id}")
        if isinstance(o.stop, OnReachingPoint):
            check_wp(subject, o.stop.waypoint)
    return errors


def validate(model: Union[Scenario, Situation], scenario: Scenario | None = None) -> list[SemanticError]:
    """Empty list iff the model satisfies every semantic rule."""
    if isinstance(model, Scenario):
        return validate_scenario(model)
    return validate_situation(model, scenario)
