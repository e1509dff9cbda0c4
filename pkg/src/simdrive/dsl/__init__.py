"""Scenario and situation language: models, parser, printer, checks, routing."""
from .geometry import Pose, Segment, extract_obstacle_geometry
from .model import (
    Connector, Cylinder, EndOfRoute, ExternalDriver, Immediately, Lane, Layer, OnEnteringPolygon, OnMoving,
    OnReachingPoint, PointIdDriver, Polygon, Rectangle, Road, Scenario, Situation, SituationObject, Spot, StopSign,
    Waypoint, Zone,
)
from .parser import DslSyntaxError, SyntaxIssue, parse, parse_file
from .printer import print_model
from .routing import NO_ROUTE, Route, RouteGraph, UnknownWaypoint, shortest_route
from .validate import SemanticError, validate

__all__ = [
    "Connector", "Cylinder", "DslSyntaxError", "EndOfRoute", "ExternalDriver", "Immediately", "Lane", "Layer",
    "NO_ROUTE", "OnEnteringPolygon", "OnMoving", "OnReachingPoint", "PointIdDriver", "Polygon", "Pose", "Rectangle",
    "Road", "Route", "RouteGraph", "Scenario", "Segment", "SemanticError", "Situation", "SituationObject", "Spot",
    "StopSign", "SyntaxIssue", "UnknownWaypoint", "Waypoint", "Zone", "extract_obstacle_geometry", "parse",
    "parse_file", "print_model", "shortest_route", "validate",
]
