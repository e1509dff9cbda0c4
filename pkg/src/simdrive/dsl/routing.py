"""Waypoint route graph and shortest-route search."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .model import Point2, Scenario


class UnknownWaypoint(KeyError):
    def __init__(self, waypoint: str):
        super().__init__(waypoint)
        self.waypoint = waypoint

    def __str__(self):
        return f"unknown waypoint {self.waypoint!r}"


def waypoint_sort_key(wp: str) -> tuple:
    """Numeric ordering for dotted ids ("1.2.1.10" after "1.2.1.9")."""
    return tuple((0, int(p), "") if p.isdigit() else (1, 0, p) for p in wp.split("."))


class RouteGraph:
    """Directed graph of waypoints with positive edge weights (meters)."""

    def __init__(self):
        self.nodes: dict[str, Point2] = {}
        self.edges: dict[str, dict[str, float]] = {}

    def add_node(self, wp: str, position: Point2) -> None:
        if wp in self.nodes:
            raise ValueError(f"duplicate waypoint {wp}")
        self.nodes[wp] = (float(position[0]), float(position[1]))
        self.edges[wp] = {}

    def add_edge(self, source: str, target: str, weight: float | None = None) -> None:
        for wp in (source, target):
            if wp not in self.nodes:
                raise UnknownWaypoint(wp)
        if weight is None:
            weight = math.dist(self.nodes[source], self.nodes[target])
        if not weight > 0:
            raise ValueError(f"edge {source} -> {target} has non-positive weight {weight}")
        # parallel edges collapse to the cheapest one
        old = self.edges[source].get(target)
        if old is None or weight < old:
            self.edges[source][target] = weight

    def successors(self, wp: str) -> dict[str, float]:
        return self.edges[wp]

    def edge_list(self) -> list[tuple[str, str, float]]:
        return [(a, b, w) for a, out in self.edges.items() for b, w in out.items()]

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, wp: str) -> bool:
        return wp in self.nodes

    def polyline(self, waypoints: Iterable[str]) -> list[Point2]:
        out = []
        for wp in waypoints:
            if wp not in self.nodes:
                raise UnknownWaypoint(wp)
            out.append(self.nodes[wp])
        return out

    @classmethod
    def from_scenario(cls, scenario: Scenario) -> "RouteGraph":
        """Consecutive lane points are joined in pointModel order; connectors as written.

        Expects a validated scenario (unique ids, resolvable connectors,
        distinct consecutive positions).
        """
        g = cls()
        for wp, pos in scenario.waypoints():
            g.add_node(wp, pos)
        for prefix, lane in scenario.lanes():
            ids = [f"{prefix}.{p.id}" for p in lane.points]
            for a, b in zip(ids, ids[1:]):
                g.add_edge(a, b)
            for c in lane.connectors:
                g.add_edge(c.source, c.target)
        return g


@dataclass(frozen=True)
class Route:
    waypoints: tuple[str, ...]
    cost: float

    @property
    def found(self) -> bool:
        return bool(self.waypoints)

    def __bool__(self) -> bool:
        return self.found


NO_ROUTE = Route((), math.inf)


def shortest_route(graph: RouteGraph, start: str, goal: str) -> Route:
    """Dijkstra; among equal-distance predecessors the smallest waypoint id wins.

    Returns :data:`NO_ROUTE` (falsy) when ``goal`` is unreachable.
    """
    for wp in (start, goal):
        if wp not in graph.nodes:
            raise UnknownWaypoint(wp)
    dist = {start: 0.0}
    pred: dict[str, str] = {}
    done: set[str] = set()
    heap = [(0.0, waypoint_sort_key(start), start)]
    while heap:
        d, _, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == goal:
            break
        ukey = waypoint_sort_key(u)
        for v, w in graph.edges[u].items():
            if v in done:
                continue
            nd = d + w
            old = dist.get(v)
            if old is None or nd < old:
                dist[v] = nd
                pred[v] = u
                heapq.heappush(heap, (nd, waypoint_sort_key(v), v))
            elif nd == old and ukey < waypoint_sort_key(pred[v]):
                pred[v] = u
    if goal not in done:
        return NO_ROUTE
    path = [goal]
    while path[-1] != start:
        path.append(pred[path[-1]])
    path.reverse()
    return Route(tuple(path), dist[goal])


def route_cost(graph: RouteGraph, waypoints: Sequence[str]) -> float:
    total = 0.0
    for a, b in zip(waypoints, waypoints[1:]):
        total += graph.edges[a][b]
    return total
