import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simdrive.dmcp import ConfigurationSet
from simdrive.dsl import parse_file
from simdrive.dsl.routing import RouteGraph
from simdrive.messages import VehicleStateMsg
from simdrive.validators import (
    DestinationReached, DistanceToRoute, ShortestRouteChosen, TraceSample, ValidatorConfigError, ValidatorPart,
    build_suite, evaluate_recording, route_polyline,
)
from simdrive.vehicle import PolylinePath, ScriptedDriver


def trace(points, vid=1, t0=0, dt=10_000):
    return [TraceSample(vid, x, y, 0.0, t0 + i * dt) for i, (x, y) in enumerate(points)]


def diamond() -> RouteGraph:
    g = RouteGraph()
    for wp, pos in {"1.1.1.1": (0, 0), "1.1.1.2": (10, 10), "1.1.1.3": (10, -10), "1.1.1.4": (20, 0)}.items():
        g.add_node(wp, pos)
    g.add_edge("1.1.1.1", "1.1.1.2")
    g.add_edge("1.1.1.2", "1.1.1.4")
    g.add_edge("1.1.1.1", "1.1.1.3", 100.0)
    g.add_edge("1.1.1.3", "1.1.1.4")
    return g


def test_destination_reached_first_time_within_radius():
    v = DestinationReached(1, (10, 0), 1.0)
    for s in trace([(0, 0), (5, 0), (9.5, 0), (30, 0)]):
        v.observe(s)
    assert v.final and v.verdict.passed and v.verdict.finalized_at == 20_000
    assert v.finish(99).finalized_at == 20_000  # verdicts are immutable once final


def test_destination_not_reached():
    v = DestinationReached(1, (10, 0), 1.0)
    for s in trace([(0, 0), (8.5, 0)]):
        v.observe(s)
    verdict = v.finish(50_000)
    assert not verdict.passed and verdict.finalized_at == 50_000
    assert verdict.line() == "VALIDATOR DestinationReached vehicle=1 FAILED not reached; closest=1.500"


def test_shortest_route_in_order():
    g = diamond()
    v = ShortestRouteChosen(1, g, "1.1.1.1", "1.1.1.4", 1.0)
    assert list(v.route) == ["1.1.1.1", "1.1.1.2", "1.1.1.4"]
    for s in trace([(0, 0), (5, 5), (10, 10), (15, 5), (20, 0)]):
        v.observe(s)
    assert v.verdict.passed and v.verdict.finalized_at == 40_000


def test_shortest_route_wrong_branch_fails():
    v = ShortestRouteChosen(1, diamond(), "1.1.1.1", "1.1.1.4", 1.0)
    for s in trace([(0, 0), (10, -10), (20, 0)]):
        v.observe(s)
    verdict = v.finish(30_000)
    assert not verdict.passed and "1.1.1.2" in verdict.detail


def weighted_diamond() -> RouteGraph:
    g = RouteGraph()
    for wp, pos in {"A": (0, 0), "B": (10, 10), "C": (10, -10), "D": (20, 0)}.items():
        g.add_node(wp, pos)
    for a, b, w in (("A", "B", 3), ("A", "C", 1), ("C", "B", 1), ("B", "D", 1), ("C", "D", 5)):
        g.add_edge(a, b, w)
    return g


def _drive(g, waypoints, dt=0.01):
    driver = ScriptedDriver(1, PolylinePath(g.polyline(waypoints)), 5.0)
    points = [(driver.pose.x, driver.pose.y)]
    while not driver.halted:
        p = driver.step(dt)
        points.append((p.x, p.y))
    return trace(points)


def test_scripted_drive_along_dijkstra_route_passes():
    g = weighted_diamond()
    v = ShortestRouteChosen(1, g, "A", "D", 0.5)
    assert list(v.route) == ["A", "C", "B", "D"]
    for s in _drive(g, v.route):
        v.observe(s)
    assert v.verdict.passed


def test_long_branch_fails_at_c():
    g = weighted_diamond()
    v = ShortestRouteChosen(1, g, "A", "D", 0.5)
    samples = _drive(g, ["A", "B", "D"])
    for s in samples:
        v.observe(s)
    verdict = v.finish(samples[-1].timestamp)
    assert not verdict.passed and verdict.detail.startswith("waypoint C not passed")


def test_shortest_route_config_errors():
    g = diamond()
    with pytest.raises(ValidatorConfigError):
        ShortestRouteChosen(1, g, "1.1.1.4", "1.1.1.1")
    with pytest.raises(ValidatorConfigError):
        ShortestRouteChosen(1, g, "1.1.1.1", "9.9.9.9")
    with pytest.raises(ValidatorConfigError):
        ShortestRouteChosen(1, g, "1.1.1.1", "1.1.1.4", 0)


def test_distance_to_route_fails_at_first_excursion():
    v = DistanceToRoute(1, [(0, 0), (100, 0)], 1.0)
    for s in trace([(0, 0.5), (10, -1.0), (20, 1.5), (30, 0)]):
        v.observe(s)
    assert not v.verdict.passed and v.verdict.finalized_at == 20_000
    assert v.verdict.detail.startswith("distance=1.500")
    ok = DistanceToRoute(1, [(0, 0), (100, 0)], 1.0)
    for s in trace([(0, 0.5), (10, -1.0)]):
        ok.observe(s)
    assert ok.finish(9).passed and ok.verdict.detail == "worst=1.000"


def _oracle_distance(p, line):
    p = np.asarray(p, float)
    best = math.inf
    for a, b in zip(line, line[1:]):
        a, b = np.asarray(a, float), np.asarray(b, float)
        ab = b - a
        denom = ab @ ab
        t = 0.0 if denom == 0 else np.clip((p - a) @ ab / denom, 0.0, 1.0)
        best = min(best, float(np.linalg.norm(p - (a + t * ab))))
    return best


coord = st.floats(-50, 50, allow_nan=False)


@settings(max_examples=200)
@given(st.lists(st.tuples(coord, coord), min_size=2, max_size=6), st.tuples(coord, coord),
       st.floats(0.1, 20))
def test_distance_to_route_matches_oracle(line, p, limit):
    v = DistanceToRoute(1, line, limit)
    v.observe(TraceSample(1, p[0], p[1], 0.0, 0))
    d = _oracle_distance(p, line)
    if abs(d - limit) > 1e-9:
        assert v.final == (d > limit)
    assert v.worst == pytest.approx(d, abs=1e-9)


def test_timestamps_must_increase():
    v = DestinationReached(1, (0, 0), 1.0)
    v.observe(TraceSample(1, 50, 0, 0, 10))
    with pytest.raises(ValueError):
        v.observe(TraceSample(1, 50, 0, 0, 10))


def test_bad_validator_parameters():
    with pytest.raises(ValidatorConfigError):
        DestinationReached(1, (0, 0), 0)
    with pytest.raises(ValidatorConfigError):
        DistanceToRoute(1, [(0, 0)], 1)
    with pytest.raises(ValidatorConfigError):
        DistanceToRoute(1, [(0, 0), (1, 1)], -1)


def test_route_polyline_fills_gaps():
    g = diamond()
    assert route_polyline(g, ["1.1.1.1", "1.1.1.4"]) == [(0, 0), (10, 10), (20, 0)]
    assert route_polyline(g, ["1.1.1.3"]) == [(10, -10)]
    with pytest.raises(ValidatorConfigError):
        route_polyline(g, ["1.1.1.4", "1.1.1.1"])


def test_build_suite(mission):
    graph = RouteGraph.from_scenario(parse_file(mission.scenario))
    suite = ConfigurationSet.load(mission.suite)
    vs = build_suite(suite, graph, [1, 4])
    assert [(v.name, v.vehicle_id) for v in vs] == [
        ("DestinationReached", 1), ("ShortestRouteChosen", 1), ("DistanceToRoute", 1),
        ("DestinationReached", 4), ("ShortestRouteChosen", 4), ("DistanceToRoute", 4)]
    only = build_suite(suite.updated({"suite.vehicles": "7"}), graph, [1])
    assert {v.vehicle_id for v in only} == {7}
    xy = build_suite(ConfigurationSet({"suite.destination.x": "3", "suite.destination.y": "4"}), graph, [1])
    assert xy[0].destination == (3.0, 4.0) and xy[0].radius == 2.0
    wps = build_suite(ConfigurationSet({"suite.distancetoroute.waypoints": "1.1.1.1, 1.1.1.2",
                                        "suite.distancetoroute.maxdeviation": "1"}), graph, [1])
    assert wps[0].route == graph.polyline(["1.1.1.1", "1.1.1.2"])


@pytest.mark.parametrize("entries", [
    {"suite.bogus": "1"},
    {"suite.destination.waypoint": "9.9.9.9"},
    {"suite.vehicles": "one"},
    {"suite.shortestroute.from": "1.1.1.1"},
    {"suite.distancetoroute.waypoints": "1.1.1.1,9.9.9.9", "suite.distancetoroute.maxdeviation": "1"},
    {"suite.distancetoroute.waypoints": "1.1.1.1,1.1.1.2"},
    {"suite.destination.x": "a", "suite.destination.y": "1"},
])
def test_build_suite_errors(mission, entries):
    graph = RouteGraph.from_scenario(parse_file(mission.scenario))
    with pytest.raises(ValidatorConfigError):
        build_suite(ConfigurationSet(entries), graph, [1])


def test_part_ignores_scripted_vehicles():
    v = DestinationReached(2, (0, 0), 1.0)
    part = ValidatorPart([v])
    part.feed(VehicleStateMsg(2, False, 0, 0, 0, 0, 0, 10))
    assert not v.final
    part.feed(VehicleStateMsg(2, True, 0, 0, 0, 0, 0, 10))
    assert v.final and part.all_final
    assert not ValidatorPart([]).all_final


def test_offline_matches_live(mission_run, mission):
    code, report, out = mission_run
    graph = RouteGraph.from_scenario(parse_file(mission.scenario))
    offline = evaluate_recording(out / "recording.rec", build_suite(ConfigurationSet.load(mission.suite), graph, [1]))
    assert offline == report.verdicts
    assert code == 0 and all(v.passed for v in offline)
