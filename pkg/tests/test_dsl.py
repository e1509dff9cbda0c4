from pathlib import Path

import pytest
from hypothesis import given, settings, strategies as st

from simdrive.dsl import (
    Connector, Cylinder, DslSyntaxError, EndOfRoute, ExternalDriver, Immediately, Lane, Layer, OnEnteringPolygon,
    OnMoving, OnReachingPoint, PointIdDriver, Polygon, Rectangle, Road, Scenario, Situation, SituationObject, Spot,
    StopSign, Waypoint, Zone, parse, parse_file, print_model, validate,
)
from simdrive.dsl.model import MARKINGS

FIXTURES = Path(__file__).parent / "fixtures"

ids = st.integers(0, 10_000)
nums = st.floats(allow_nan=False, allow_infinity=False)
points = st.tuples(nums, nums)
texts = st.text(st.characters(blacklist_characters="\n", blacklist_categories=("Cs",)), max_size=12)
wpids = st.tuples(ids, ids, ids, ids).map(lambda t: ".".join(map(str, t)))

lanes = st.builds(
    Lane, ids, nums, st.lists(st.builds(Waypoint, ids, points), max_size=4).map(tuple),
    st.sampled_from(MARKINGS), st.sampled_from(MARKINGS), st.none() | nums,
    st.lists(st.builds(Connector, wpids, wpids), max_size=2).map(tuple),
    st.lists(st.builds(StopSign, wpids), max_size=2).map(tuple),
)
layers = st.builds(Layer, ids, nums, st.lists(st.builds(Road, ids, texts, st.lists(lanes, max_size=2).map(tuple)),
                                              max_size=2).map(tuple))
ground = st.one_of(
    st.builds(Polygon, ids, st.lists(points, min_size=1, max_size=5).map(tuple), nums),
    st.builds(Cylinder, ids, points, nums, nums),
)
zones = st.builds(Zone, ids, texts, st.lists(wpids, max_size=3).map(tuple),
                  st.lists(st.builds(Spot, ids, points, points), max_size=2).map(tuple))
scenarios = st.builds(Scenario, texts, texts, texts, st.none() | points, st.lists(ground, max_size=4).map(tuple),
                      st.lists(layers, max_size=2).map(tuple), st.lists(zones, max_size=2).map(tuple))

behaviors = st.one_of(
    st.builds(PointIdDriver, st.lists(wpids, min_size=1, max_size=4).map(tuple), nums),
    st.builds(ExternalDriver, wpids, st.none() | nums),
)
starts = st.one_of(st.just(Immediately()), st.builds(OnMoving, ids), st.builds(OnEnteringPolygon, ids, ids))
stops = st.one_of(st.just(EndOfRoute()), st.builds(OnReachingPoint, wpids))
situations = st.builds(Situation, texts, texts, texts, st.lists(
    st.builds(SituationObject, ids, texts, st.builds(Rectangle, nums, nums), behaviors, starts, stops),
    max_size=4).map(tuple))


@settings(max_examples=150, deadline=None)
@given(scenarios)
def test_scenario_print_parse_round_trip(model):
    assert parse(print_model(model)) == model


@settings(max_examples=150, deadline=None)
@given(situations)
def test_situation_print_parse_round_trip(model):
    assert parse(print_model(model)) == model


def test_reference_fixture_round_trips():
    scn = parse_file(FIXTURES / "urban-block.scn")
    sit = parse_file(FIXTURES / "urban-block.sit")
    assert parse(print_model(scn)) == scn
    assert parse(print_model(sit)) == sit
    assert validate(scn) == []
    assert validate(sit, scn) == []
    stationary = (len(scn.ground) + len(scn.layers) + sum(len(layer.roads) for layer in scn.layers)
                  + sum(1 + len(lane.points) + len(lane.connectors) + len(lane.traffic_controls)
                        for _, lane in scn.lanes())
                  + sum(1 + len(z.spots) for z in scn.zones))
    assert stationary >= 25
    assert len(sit.scripted_objects()) == 2
    assert [o.id for o in sit.external_objects()] == [1]


def test_unclosed_block_reports_opening_line():
    text = 'SCENARIO "x" {\n  VERSION = "1";\n  LAYER 1 {\n    HEIGHT = 0;\n'
    with pytest.raises(DslSyntaxError) as e:
        parse(text)
    assert e.value.line == 5
    assert "opened at line 3" in str(e.value)


@pytest.mark.parametrize("text, line", [
    ('SCENARIO "x" {\n  VERSION = 1;\n}', 2),
    ('SCENARIO "x" {\n  BOGUS = 1;\n}', 2),
    ('SITUATION "s" {\n}\n', 2),  # SCENARIO reference is required
    ('SCENARIO "x" {}\nSCENARIO "y" {}', 2),
    ('SCENARIO "x" {\n VERSION = "a";\n VERSION = "b";\n}', 3),
    ('SCENARIO "x" {\n  LAYER 1 { ROAD 1 { LANE 1 { WIDTH = 3; LEFTMARKING = dotted; } } }\n}', 2),
    ('\n\n  @', 3),
    ('HELLO', 1),
])
def test_syntax_errors_carry_line(text, line):
    with pytest.raises(DslSyntaxError) as e:
        parse(text)
    assert e.value.line == line


def test_comments_and_waypoint_normalization():
    sit = parse('# c\nSITUATION "s" { // c\n SCENARIO = "x";\n OBJECT 1 { SHAPE = RECTANGLE(1, 1);'
                ' EXTERNALDRIVER { STARTPOINT = 01.2.3.04; } }\n}')
    assert sit.objects[0].behavior == ExternalDriver("1.2.3.4")
    assert sit.objects[0].start == Immediately() and sit.objects[0].stop == EndOfRoute()


def _scenario(lanes_text: str, ground: str = "") -> str:
    return f'SCENARIO "t" {{ GROUND {{ {ground} }} LAYER 1 {{ ROAD 1 {{ {lanes_text} }} }} }}'


@pytest.mark.parametrize("text, rule", [
    (_scenario("LANE 1 { WIDTH = 3; POINT 1 = (0, 0); }"), "lane-points"),
    (_scenario("LANE 1 { WIDTH = 3; POINT 1 = (0, 0); POINT 2 = (0, 0); }"), "zero-length-edge"),
    (_scenario("LANE 1 { WIDTH = 0; POINT 1 = (0, 0); POINT 2 = (1, 0); }"), "lane-width"),
    (_scenario("LANE 1 { WIDTH = 3; POINT 1 = (0, 0); POINT 2 = (1, 0); CONNECTOR 1.1.1.2 -> 1.1.9.1; }"),
     "dangling-connector"),
    (_scenario("LANE 1 { WIDTH = 3; POINT 1 = (0, 0); POINT 2 = (1, 0); }",
               "POLYGON 1 { HEIGHT = 1; VERTICES = (0,0) (1,0) (1,1); } CYLINDER 1 { CENTER = (5,5);"
               " RADIUS = 1; HEIGHT = 1; }"), "duplicate-id"),
    (_scenario("LANE 1 { WIDTH = 3; POINT 1 = (0, 0); POINT 2 = (1, 0); }",
               "POLYGON 1 { HEIGHT = 1; VERTICES = (0,0) (1,0); }"), "polygon-vertices"),
    (_scenario("LANE 1 { WIDTH = 3; POINT 1 = (0, 0); POINT 1 = (1, 0); }"), "duplicate-id"),
])
def test_scenario_semantic_rules(text, rule):
    assert rule in {e.rule for e in validate(parse(text))}


def test_situation_semantic_rules():
    scn = parse_file(FIXTURES / "urban-block.scn")
    sit = parse('SITUATION "s" { SCENARIO = "other";'
                ' OBJECT 1 { SHAPE = RECTANGLE(1, 1); EXTERNALDRIVER { STARTPOINT = 9.9.9.9; } }'
                ' OBJECT 2 { SHAPE = RECTANGLE(0, 1); POINTIDDRIVER { ROUTE = 1.1.1.1; SPEED = 0; }'
                '   START = ONMOVING(2); STOP = ONREACHINGPOINT(1.1.1.3); }'
                ' OBJECT 3 { SHAPE = RECTANGLE(1, 1); POINTIDDRIVER { ROUTE = 1.1.1.1, 1.1.1.2; SPEED = 1; }'
                '   START = ONENTERINGPOLYGON(7, 99); }'
                '}')
    rules = {e.rule for e in validate(sit, scn)}
    assert {"scenario-ref", "dangling-reference", "shape-size", "route-length", "speed", "stop-point",
            "self-reference"} <= rules
