"""Canonical text output for scenario and situation models.

``parse(print_model(m)) == m`` for every model the parser can produce.
"""
from __future__ import annotations

from typing import Union

from .model import (
    Cylinder, EndOfRoute, ExternalDriver, Immediately, OnEnteringPolygon, OnMoving, OnReachingPoint, PointIdDriver,
    Polygon, Scenario, Situation,
)

INDENT = "    "


def _num(v: float) -> str:
    return repr(float(v))


def _str(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def _pt(p) -> str:
    return f"({_num(p[0])}, {_num(p[1])})"


def print_scenario(s: Scenario) -> str:
    out = [f"SCENARIO {_str(s.name)} {{"]

    def w(depth: int, line: str) -> None:
        out.append(INDENT * depth + line)

    w(1, f"VERSION = {_str(s.version)};")
    w(1, f"DATE = {_str(s.date)};")
    if s.origin is not None:
        w(1, f"ORIGIN = {_num(s.origin[0])}, {_num(s.origin[1])};")
    if s.ground:
        w(1, "GROUND {")
        for g in s.ground:
            if isinstance(g, Polygon):
                w(2, f"POLYGON {g.id} {{")
                w(3, f"HEIGHT = {_num(g.height)};")
                w(3, "VERTICES = " + " ".join(_pt(v) for v in g.vertices) + ";")
            else:
                assert isinstance(g, Cylinder)
                w(2, f"CYLINDER {g.id} {{")
                w(3, f"CENTER = {_pt(g.center)};")
                w(3, f"RADIUS = {_num(g.radius)};")
                w(3, f"HEIGHT = {_num(g.height)};")
            w(2, "}")
        w(1, "}")
    for layer in s.layers:
        w(1, f"LAYER {layer.id} {{")
        w(2, f"HEIGHT = {_num(layer.height)};")
        for road in layer.roads:
            w(2, f"ROAD {road.id} {{")
            w(3, f"NAME = {_str(road.name)};")
            for lane in road.lanes:
                w(3, f"LANE {lane.id} {{")
                w(4, f"WIDTH = {_num(lane.width)};")
                w(4, f"LEFTMARKING = {lane.left_marking};")
                w(4, f"RIGHTMARKING = {lane.right_marking};")
                if lane.speed_limit is not None:
                    w(4, f"SPEEDLIMIT = {_num(lane.speed_limit)};")
                for p in lane.points:
                    w(4, f"POINT {p.id} = {_pt(p.position)};")
                for c in lane.connectors:
                    w(4, f"CONNECTOR {c.source} -> {c.target};")
                for t in lane.traffic_controls:
                    w(4, f"STOPSIGN {t.waypoint};")
                w(3, "}")
            w(2, "}")
        w(1, "}")
    for zone in s.zones:
        w(1, f"ZONE {zone.id} {{")
        w(2, f"NAME = {_str(zone.name)};")
        if zone.perimeter:
            w(2, "PERIMETER = " + ", ".join(zone.perimeter) + ";")
        for spot in zone.spots:
            w(2, f"SPOT {spot.id} = {_pt(spot.first)} {_pt(spot.second)};")
        w(1, "}")
    out.append("}")
    return "\n".join(out) + "\n"


def print_situation(s: Situation) -> str:
    out = [f"SITUATION {_str(s.name)} {{", f"{INDENT}VERSION = {_str(s.version)};",
           f"{INDENT}SCENARIO = {_str(s.scenario)};"]
    for o in s.objects:
        i2, i3 = INDENT * 2, INDENT * 3
        out.append(f"{INDENT}OBJECT {o.id} {{")
        out.append(f"{i2}NAME = {_str(o.name)};")
        out.append(f"{i2}SHAPE = RECTANGLE({_num(o.shape.length)}, {_num(o.shape.width)});")
        b = o.behavior
        if isinstance(b, PointIdDriver):
            out.append(f"{i2}POINTIDDRIVER {{")
            out.append(f"{i3}ROUTE = " + ", ".join(b.route) + ";")
            out.append(f"{i3}SPEED = {_num(b.speed)};")
        else:
            assert isinstance(b, ExternalDriver)
            out.append(f"{i2}EXTERNALDRIVER {{")
            out.append(f"{i3}STARTPOINT = {b.start};")
            if b.heading is not None:
                out.append(f"{i3}HEADING = {_num(b.heading)};")
        out.append(f"{i2}}}")
        st = o.start
        if isinstance(st, Immediately):
            out.append(f"{i2}START = IMMEDIATELY;")
        elif isinstance(st, OnMoving):
            out.append(f"{i2}START = ONMOVING({st.object_id});")
        else:
            assert isinstance(st, OnEnteringPolygon)
            out.append(f"{i2}START = ONENTERINGPOLYGON({st.object_id}, {st.polygon_id});")
        sp = o.stop
        if isinstance(sp, EndOfRoute):
            out.append(f"{i2}STOP = ENDOFROUTE;")
        else:
            assert isinstance(sp, OnReachingPoint)
            out.append(f"{i2}STOP = ONREACHINGPOINT({sp.waypoint});")
        out.append(f"{INDENT}}}")
    out.append("}")
    return "\n".join(out) + "\n"


def print_model(model: Union[Scenario, Situation]) -> str:
    if isinstance(model, Scenario):
        return print_scenario(model)
    return print_situation(model)
