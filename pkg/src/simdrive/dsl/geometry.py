"""Planar geometry: poses, obstacle segments, polylines."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

from .model import Cylinder, Point2, Polygon, Rectangle, Scenario, Situation

CYLINDER_SEGMENTS = 16
OBJECT_HEIGHT = 1.5  # m, height of dynamic object footprints


class Pose(NamedTuple):
    x: float
    y: float
    heading: float = 0.0


@dataclass(frozen=True)
class Segment:
    x1: float
    y1: float
    x2: float
    y2: float
    height: float
    source: str = ""

    @property
    def length(self) -> float:
        return math.hypot(self.x2 - self.x1, self.y2 - self.y1)


def ring_segments(vertices: Sequence[Point2], height: float, source: str) -> list[Segment]:
    n = len(vertices)
    return [
        Segment(*vertices[i], *vertices[(i + 1) % n], height, source)
        for i in range(n)
    ]


def cylinder_vertices(c: Cylinder, n: int = CYLINDER_SEGMENTS) -> list[Point2]:
    cx, cy = c.center
    return [(cx + c.radius * math.cos(2 * math.pi * k / n), cy + c.radius * math.sin(2 * math.pi * k / n))
            for k in range(n)]


def rectangle_corners(shape: Rectangle, pose: Pose) -> list[Point2]:
    """Footprint corners, counter-clockwise from front-left, centered on the pose."""
    hl, hw = shape.length / 2, shape.width / 2
    c, s = math.cos(pose.heading), math.sin(pose.heading)
    local = [(hl, hw), (-hl, hw), (-hl, -hw), (hl, -hw)]
    return [(pose.x + c * lx - s * ly, pose.y + s * lx + c * ly) for lx, ly in local]


def ground_segments(scenario: Scenario) -> list[Segment]:
    out: list[Segment] = []
    for g in scenario.ground:
        if isinstance(g, Polygon):
            out.extend(ring_segments(g.vertices, g.height, f"polygon {g.id}"))
        else:
            out.extend(ring_segments(cylinder_vertices(g), g.height, f"cylinder {g.id}"))
    return out


def extract_obstacle_geometry(
    scenario: Scenario,
    situation: Situation | None = None,
    poses: Mapping[int, Pose] | None = None,
    exclude: Iterable[int] = (),
) -> list[Segment]:
    """Height-carrying segments of all ground shapes plus object footprints.

    ``poses`` maps situation object ids to their current pose; objects
    without a pose and ids in ``exclude`` contribute nothing.  Lane markings
    are not obstacles.
    """
    out = ground_segments(scenario)
    if situation is not None and poses:
        skip = set(exclude)
        for obj in sorted(situation.objects, key=lambda o: o.id):
            if obj.id in skip or obj.id not in poses:
                continue
            corners = rectangle_corners(obj.shape, poses[obj.id])
            out.extend(ring_segments(corners, OBJECT_HEIGHT, f"object {obj.id}"))
    return out


def point_in_polygon(p: Point2, vertices: Sequence[Point2]) -> bool:
    x, y = p
    inside = False
    n = len(vertices)
    for i in range(n):
        x1, y1 = vertices[i]
        x2, y2 = vertices[(i + 1) % n]
        if (y1 > y) != (y2 > y):
            xc = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
            if x < xc:
                inside = not inside
    return inside


# -- polylines ----------------------------------------------------------------

def closest_point_on_segment(p: Point2, a: Point2, b: Point2) -> Point2:
    ax, ay = a
    dx, dy = b[0] - ax, b[1] - ay
    l2 = dx * dx + dy * dy
    if l2 == 0.0:
        return a
    t = ((p[0] - ax) * dx + (p[1] - ay) * dy) / l2
    t = min(1.0, max(0.0, t))
    return (ax + t * dx, ay + t * dy)


def distance_to_polyline(p: Point2, polyline: Sequence[Point2]) -> float:
    if len(polyline) == 1:
        return math.dist(p, polyline[0])
    return min(math.dist(p, closest_point_on_segment(p, a, b)) for a, b in zip(polyline, polyline[1:]))


def polyline_length(polyline: Sequence[Point2]) -> float:
    return sum(math.dist(a, b) for a, b in zip(polyline, polyline[1:]))
