"""LL(1) recursive-descent parser for ``.scn`` and ``.sit`` files.

The normative grammar lives in ``docs/grammar.ebnf``.  Every production is
selected by its leading keyword, so one token of lookahead suffices.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Union

from .model import (
    MARKINGS, Connector, Cylinder, EndOfRoute, ExternalDriver, Immediately, Lane, Layer, OnEnteringPolygon,
    OnMoving, OnReachingPoint, PointIdDriver, Polygon, Rectangle, Road, Scenario, Situation, SituationObject,
    Spot, StopSign, Waypoint, Zone,
)

KEYWORDS = frozenset("""
    SCENARIO SITUATION VERSION DATE ORIGIN GROUND POLYGON CYLINDER HEIGHT VERTICES CENTER RADIUS
    LAYER ROAD NAME LANE WIDTH LEFTMARKING RIGHTMARKING SPEEDLIMIT POINT CONNECTOR STOPSIGN
    ZONE PERIMETER SPOT OBJECT SHAPE RECTANGLE POINTIDDRIVER EXTERNALDRIVER ROUTE SPEED
    STARTPOINT HEADING START STOP IMMEDIATELY ONMOVING ONENTERINGPOLYGON ENDOFROUTE ONREACHINGPOINT
""".split())

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*|//[^\n]*)
  | (?P<wpid>\d+\.\d+\.\d+\.\d+)
  | (?P<arrow>->)
  | (?P<number>-?\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>[{}();=,])
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD IDENT NUMBER STRING WPID PUNCT EOF
    value: str
    line: int
    col: int

    def describe(self) -> str:
        if self.kind == "EOF":
            return "end of input"
        return repr(self.value)


@dataclass(frozen=True)
class SyntaxIssue:
    line: int
    col: int
    message: str
    expected: tuple[str, ...] = ()

    def __str__(self):
        exp = f" (expected {', '.join(self.expected)})" if self.expected else ""
        return f"{self.line}:{self.col}: {self.message}{exp}"


class DslSyntaxError(Exception):
    def __init__(self, errors: list[SyntaxIssue]):
        self.errors = errors
        super().__init__("; ".join(str(e) for e in errors))

    @property
    def line(self) -> int:
        return self.errors[0].line


def tokenize(text: str) -> list[Token]:
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise DslSyntaxError([SyntaxIssue(line, col, f"unexpected character {text[pos]!r}")])
        kind = m.lastgroup
        value = m.group()
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "word":
            tokens.append(Token("KEYWORD" if value in KEYWORDS else "IDENT", value, line, col))
        elif kind == "string":
            tokens.append(Token("STRING", re.sub(r"\\(.)", r"\1", value[1:-1]), line, col))
        elif kind in ("number", "wpid"):
            tokens.append(Token(kind.upper(), value, line, col))
        elif kind in ("punct", "arrow"):
            tokens.append(Token("PUNCT", value, line, col))
        pos = m.end()
    tokens.append(Token("EOF", "", line, pos - line_start + 1))
    return tokens


def _describe(expected: str) -> str:
    if expected in ("NUMBER", "STRING", "WPID", "INT", "IDENT"):
        return {"NUMBER": "number", "STRING": "string", "WPID": "waypoint id", "INT": "integer",
                "IDENT": "identifier"}[expected]
    return repr(expected)


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def error(self, message: str, expected=(), tok: Token | None = None) -> DslSyntaxError:
        tok = tok or self.tok
        return DslSyntaxError([SyntaxIssue(tok.line, tok.col, message, tuple(_describe(e) for e in expected))])

    def unexpected(self, expected) -> DslSyntaxError:
        return self.error(f"unexpected {self.tok.describe()}", expected)

    def at(self, value: str) -> bool:
        return self.tok.kind in ("KEYWORD", "PUNCT") and self.tok.value == value

    def expect(self, value: str) -> Token:
        if not self.at(value):
            raise self.unexpected([value])
        t = self.tok
        self.i += 1
        return t

    def number(self) -> float:
        if self.tok.kind != "NUMBER":
            raise self.unexpected(["NUMBER"])
        v = float(self.tok.value)
        self.i += 1
        return v

    def integer(self) -> int:
        t = self.tok
        if t.kind != "NUMBER" or not re.fullmatch(r"\d+", t.value):
            raise self.unexpected(["INT"])
        self.i += 1
        return int(t.value)

    def string(self) -> str:
        if self.tok.kind != "STRING":
            raise self.unexpected(["STRING"])
        v = self.tok.value
        self.i += 1
        return v

    def wpid(self) -> str:
        t = self.tok
        if t.kind != "WPID":
            raise self.unexpected(["WPID"])
        self.i += 1
        return ".".join(str(int(p)) for p in t.value.split("."))

    def point(self) -> tuple[float, float]:
        self.expect("(")
        x = self.number()
        self.expect(",")
        y = self.number()
        self.expect(")")
        return (x, y)

    def attr(self, keyword: str, value: Callable[[], object]):
        self.expect(keyword)
        self.expect("=")
        v = value()
        self.expect(";")
        return v

    def block(self, items: dict[str, Callable[[], None]], owner: str, open_tok: Token) -> None:
        """Parse ``{ item* }``; ``items`` maps each leading keyword to its handler."""
        self.expect("{")
        while not self.at("}"):
            t = self.tok
            handler = items.get(t.value) if t.kind == "KEYWORD" else None
            if handler is None:
                expected = sorted(items) + ["}"]
                if t.kind == "EOF":
                    raise self.error(
                        f"unclosed {owner} block opened at line {open_tok.line}", expected)
                raise self.unexpected(expected)
            handler()
        self.expect("}")

    def once(self, seen: dict, key: str, tok: Token, value) -> None:
        if key in seen:
            raise self.error(f"duplicate {key} attribute", tok=tok)
        seen[key] = value

    def require(self, seen: dict, key: str, owner: str, tok: Token):
        if key not in seen:
            raise self.error(f"{owner} is missing required attribute {key}", tok=tok)
        return seen[key]

    def single(self, seen: dict, key: str, value: Callable[[], object]) -> Callable[[], None]:
        def handler():
            t = self.tok
            self.once(seen, key, t, self.attr(key, value))
        return handler

    # -- scenario --

    def scenario(self) -> Scenario:
        self.expect("SCENARIO")
        name = self.string()
        open_tok = self.tok
        seen: dict = {}
        ground, layers, zones = [], [], []

        def origin():
            t = self.tok
            self.expect("ORIGIN")
            self.expect("=")
            lat = self.number()
            self.expect(",")
            lon = self.number()
            self.expect(";")
            self.once(seen, "ORIGIN", t, (lat, lon))

        def ground_block():
            t = self.tok
            self.expect("GROUND")
            self.block({"POLYGON": lambda: ground.append(self.polygon()),
                        "CYLINDER": lambda: ground.append(self.cylinder())}, "GROUND", t)

        self.block({
            "VERSION": self.single(seen, "VERSION", self.string),
            "DATE": self.single(seen, "DATE", self.string),
            "ORIGIN": origin,
            "GROUND": ground_block,
            "LAYER": lambda: layers.append(self.layer()),
            "ZONE": lambda: zones.append(self.zone()),
        }, "SCENARIO", open_tok)
        return Scenario(name, seen.get("VERSION", ""), seen.get("DATE", ""), seen.get("ORIGIN"),
                        tuple(ground), tuple(layers), tuple(zones))

    def polygon(self) -> Polygon:
        t = self.expect("POLYGON")
        pid = self.integer()
        seen: dict = {}

        def vertices():
            vt = self.tok
            self.expect("VERTICES")
            self.expect("=")
            pts = [self.point()]
            while self.at("("):
                pts.append(self.point())
            self.expect(";")
            self.once(seen, "VERTICES", vt, tuple(pts))

        self.block({"HEIGHT": self.single(seen, "HEIGHT", self.number), "VERTICES": vertices}, "POLYGON", t)
        close = self.toks[self.i - 1]
        return Polygon(pid, self.require(seen, "VERTICES", f"POLYGON {pid}", close),
                       self.require(seen, "HEIGHT", f"POLYGON {pid}", close))

    def cylinder(self) -> Cylinder:
        t = self.expect("CYLINDER")
        cid = self.integer()
        seen: dict = {}
        self.block({
            "CENTER": self.single(seen, "CENTER", self.point),
            "RADIUS": self.single(seen, "RADIUS", self.number),
            "HEIGHT": self.single(seen, "HEIGHT", self.number),
        }, "CYLINDER", t)
        close = self.toks[self.i - 1]
        owner = f"CYLINDER {cid}"
        return Cylinder(cid, self.require(seen, "CENTER", owner, close), self.require(seen, "RADIUS", owner, close),
                        self.require(seen, "HEIGHT", owner, close))

    def layer(self) -> Layer:
        t = self.expect("LAYER")
        lid = self.integer()
        seen: dict = {}
        roads = []
        self.block({"HEIGHT": self.single(seen, "HEIGHT", self.number),
                    "ROAD": lambda: roads.append(self.road())}, "LAYER", t)
        return Layer(lid, seen.get("HEIGHT", 0.0), tuple(roads))

    def road(self) -> Road:
        t = self.expect("ROAD")
        rid = self.integer()
        seen: dict = {}
        lanes = []
        self.block({"NAME": self.single(seen, "NAME", self.string),
                    "LANE": lambda: lanes.append(self.lane())}, "ROAD", t)
        return Road(rid, seen.get("NAME", ""), tuple(lanes))

    def marking(self) -> str:
        t = self.tok
        if t.kind != "IDENT" or t.value not in MARKINGS:
            raise self.unexpected(list(MARKINGS))
        self.i += 1
        return t.value

    def lane(self) -> Lane:
        t = self.expect("LANE")
        lid = self.integer()
        seen: dict = {}
        points, connectors, controls = [], [], []

        def point():
            self.expect("POINT")
            pid = self.integer()
            self.expect("=")
            pos = self.point()
            self.expect(";")
            points.append(Waypoint(pid, pos))

        def connector():
            self.expect("CONNECTOR")
            src = self.wpid()
            self.expect("->")
            dst = self.wpid()
            self.expect(";")
            connectors.append(Connector(src, dst))

        def stopsign():
            self.expect("STOPSIGN")
            wp = self.wpid()
            self.expect(";")
            controls.append(StopSign(wp))

        self.block({
            "WIDTH": self.single(seen, "WIDTH", self.number),
            "LEFTMARKING": self.single(seen, "LEFTMARKING", self.marking),
            "RIGHTMARKING": self.single(seen, "RIGHTMARKING", self.marking),
            "SPEEDLIMIT": self.single(seen, "SPEEDLIMIT", self.number),
            "POINT": point,
            "CONNECTOR": connector,
            "STOPSIGN": stopsign,
        }, "LANE", t)
        close = self.toks[self.i - 1]
        return Lane(lid, self.require(seen, "WIDTH", f"LANE {lid}", close), tuple(points),
                    seen.get("LEFTMARKING", "none"), seen.get("RIGHTMARKING", "none"),
                    seen.get("SPEEDLIMIT"), tuple(connectors), tuple(controls))

    def zone(self) -> Zone:
        t = self.expect("ZONE")
        zid = self.integer()
        seen: dict = {}
        spots = []

        def perimeter():
            pt = self.tok
            self.expect("PERIMETER")
            self.expect("=")
            ids = [self.wpid()]
            while self.at(","):
                self.i += 1
                ids.append(self.wpid())
            self.expect(";")
            self.once(seen, "PERIMETER", pt, tuple(ids))

        def spot():
            self.expect("SPOT")
            sid = self.integer()
            self.expect("=")
            a = self.point()
            b = self.point()
            self.expect(";")
            spots.append(Spot(sid, a, b))

        self.block({"NAME": self.single(seen, "NAME", self.string), "PERIMETER": perimeter, "SPOT": spot},
                   "ZONE", t)
        return Zone(zid, seen.get("NAME", ""), seen.get("PERIMETER", ()), tuple(spots))

    # -- situation --

    def situation(self) -> Situation:
        t = self.expect("SITUATION")
        name = self.string()
        seen: dict = {}
        objects = []
        self.block({
            "VERSION": self.single(seen, "VERSION", self.string),
            "SCENARIO": self.single(seen, "SCENARIO", self.string),
            "OBJECT": lambda: objects.append(self.object()),
        }, "SITUATION", t)
        return Situation(name, self.require(seen, "SCENARIO", "SITUATION", self.toks[self.i - 1]),
                         seen.get("VERSION", ""), tuple(objects))

    def object(self) -> SituationObject:
        t = self.expect("OBJECT")
        oid = self.integer()
        seen: dict = {}

        def shape():
            st = self.tok
            self.expect("SHAPE")
            self.expect("=")
            self.expect("RECTANGLE")
            self.expect("(")
            length = self.number()
            self.expect(",")
            width = self.number()
            self.expect(")")
            self.expect(";")
            self.once(seen, "SHAPE", st, Rectangle(length, width))

        def pointid():
            bt = self.expect("POINTIDDRIVER")
            inner: dict = {}

            def route():
                rt = self.tok
                self.expect("ROUTE")
                self.expect("=")
                ids = [self.wpid()]
                while self.at(","):
                    self.i += 1
                    ids.append(self.wpid())
                self.expect(";")
                self.once(inner, "ROUTE", rt, tuple(ids))

            self.block({"ROUTE": route, "SPEED": self.single(inner, "SPEED", self.number)}, "POINTIDDRIVER", bt)
            close = self.toks[self.i - 1]
            self.once(seen, "BEHAVIOR", bt, PointIdDriver(
                self.require(inner, "ROUTE", "POINTIDDRIVER", close),
                self.require(inner, "SPEED", "POINTIDDRIVER", close)))

        def external():
            bt = self.expect("EXTERNALDRIVER")
            inner: dict = {}
            self.block({"STARTPOINT": self.single(inner, "STARTPOINT", self.wpid),
                        "HEADING": self.single(inner, "HEADING", self.number)}, "EXTERNALDRIVER", bt)
            close = self.toks[self.i - 1]
            self.once(seen, "BEHAVIOR", bt, ExternalDriver(
                self.require(inner, "STARTPOINT", "EXTERNALDRIVER", close), inner.get("HEADING")))

        def start_condition():
            if self.at("IMMEDIATELY"):
                self.i += 1
                return Immediately()
            if self.at("ONMOVING"):
                self.i += 1
                self.expect("(")
                other = self.integer()
                self.expect(")")
                return OnMoving(other)
            if self.at("ONENTERINGPOLYGON"):
                self.i += 1
                self.expect("(")
                other = self.integer()
                self.expect(",")
                poly = self.integer()
                self.expect(")")
                return OnEnteringPolygon(other, poly)
            raise self.unexpected(["IMMEDIATELY", "ONMOVING", "ONENTERINGPOLYGON"])

        def stop_condition():
            if self.at("ENDOFROUTE"):
                self.i += 1
                return EndOfRoute()
            if self.at("ONREACHINGPOINT"):
                self.i += 1
                self.expect("(")
                wp = self.wpid()
                self.expect(")")
                return OnReachingPoint(wp)
            raise self.unexpected(["ENDOFROUTE", "ONREACHINGPOINT"])

        self.block({
            "NAME": self.single(seen, "NAME", self.string),
            "SHAPE": shape,
            "POINTIDDRIVER": pointid,
            "EXTERNALDRIVER": external,
            "START": self.single(seen, "START", start_condition),
            "STOP": self.single(seen, "STOP", stop_condition),
        }, "OBJECT", t)
        close = self.toks[self.i - 1]
        owner = f"OBJECT {oid}"
        return SituationObject(
            oid, seen.get("NAME", ""), self.require(seen, "SHAPE", owner, close),
            self.require(seen, "BEHAVIOR", owner, close),
            seen.get("START", Immediately()), seen.get("STOP", EndOfRoute()),
        )

    def document(self) -> Union[Scenario, Situation]:
        if self.at("SCENARIO"):
            model = self.scenario()
        elif self.at("SITUATION"):
            model = self.situation()
        else:
            raise self.unexpected(["SCENARIO", "SITUATION"])
        if self.tok.kind != "EOF":
            raise self.error(f"unexpected {self.tok.describe()} after end of document")
        return model


def parse(text: str) -> Union[Scenario, Situation]:
    """Parse scenario or situation text; raises :class:`DslSyntaxError`."""
    return _Parser(tokenize(text)).document()


def parse_file(path: str | Path) -> Union[Scenario, Situation]:
    return parse(Path(path).read_text(encoding="utf-8"))
