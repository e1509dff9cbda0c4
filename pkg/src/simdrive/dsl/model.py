"""Immutable models for stationary scenarios and dynamic situations."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

Point2 = tuple[float, float]

MARKINGS = ("solid", "broken", "none")


# -- scenario -----------------------------------------------------------------

@dataclass(frozen=True)
class Polygon:
    id: int
    vertices: tuple[Point2, ...]
    height: float


@dataclass(frozen=True)
class Cylinder:
    id: int
    center: Point2
    radius: float
    height: float


GroundShape = Union[Polygon, Cylinder]


@dataclass(frozen=True)
class Waypoint:
    id: int
    position: Point2


@dataclass(frozen=True)
class Connector:
    source: str
    target: str


@dataclass(frozen=True)
class StopSign:
    waypoint: str


@dataclass(frozen=True)
class Lane:
    id: int
    width: float
    points: tuple[Waypoint, ...]
    left_marking: str = "none"
    right_marking: str = "none"
    speed_limit: float | None = None
    connectors: tuple[Connector, ...] = ()
    traffic_controls: tuple[StopSign, ...] = ()


@dataclass(frozen=True)
class Road:
    id: int
    name: str
    lanes: tuple[Lane, ...]


@dataclass(frozen=True)
class Layer:
    id: int
    height: float
    roads: tuple[Road, ...]


@dataclass(frozen=True)
class Spot:
    id: int
    first: Point2
    second: Point2


@dataclass(frozen=True)
class Zone:
    id: int
    name: str
    perimeter: tuple[str, ...]
    spots: tuple[Spot, ...] = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    version: str = ""
    date: str = ""
    origin: Point2 | None = None  # WGS84 lat/lon, carried only
    ground: tuple[GroundShape, ...] = ()
    layers: tuple[Layer, ...] = ()
    zones: tuple[Zone, ...] = ()

    def lanes(self) -> Iterator[tuple[str, Lane]]:
        """Yield ``("layer.road.lane", lane)`` for every lane."""
        for layer in self.layers:
            for road in layer.roads:
                for lane in road.lanes:
                    yield f"{layer.id}.{road.id}.{lane.id}", lane

    def waypoints(self) -> Iterator[tuple[str, Point2]]:
        for prefix, lane in self.lanes():
            for p in lane.points:
                yield f"{prefix}.{p.id}", p.position

    def waypoint_positions(self) -> dict[str, Point2]:
        return dict(self.waypoints())

    def polygon(self, polygon_id: int) -> Polygon | None:
        for g in self.ground:
            if isinstance(g, Polygon) and g.id == polygon_id:
                return g
        return None


# -- situation ----------------------------------------------------------------

@dataclass(frozen=True)
class Rectangle:
    length: float
    width: float


@dataclass(frozen=True)
class PointIdDriver:
    route: tuple[str, ...]
    speed: float


@dataclass(frozen=True)
class ExternalDriver:
    """A vehicle driven by a system under test."""

    start: str  # waypoint id
    heading: float | None = None  # None: face along the lane


@dataclass(frozen=True)
class Immediately:
    pass


@dataclass(frozen=True)
class OnMoving:
    object_id: int


@dataclass(frozen=True)
class OnEnteringPolygon:
    object_id: int
    polygon_id: int


@dataclass(frozen=True)
class EndOfRoute:
    pass


@dataclass(frozen=True)
class OnReachingPoint:
    waypoint: str


Behavior = Union[PointIdDriver, ExternalDriver]
StartCondition = Union[Immediately, OnMoving, OnEnteringPolygon]
StopCondition = Union[EndOfRoute, OnReachingPoint]


@dataclass(frozen=True)
class SituationObject:
    id: int
    name: str
    shape: Rectangle
    behavior: Behavior
    start: StartCondition = Immediately()
    stop: StopCondition = EndOfRoute()


@dataclass(frozen=True)
class Situation:
    name: str
    scenario: str
    version: str = ""
    objects: tuple[SituationObject, ...] = ()

    def external_objects(self) -> list[SituationObject]:
        return sorted((o for o in self.objects if isinstance(o.behavior, ExternalDriver)), key=lambda o: o.id)

    def scripted_objects(self) -> list[SituationObject]:
        return sorted((o for o in self.objects if isinstance(o.behavior, PointIdDriver)), key=lambda o: o.id)

    def object(self, object_id: int) -> SituationObject | None:
        for o in self.objects:
            if o.id == object_id:
                return o
        return None
