"""Building blocks shared by the run loop and everything it hosts."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from .dmcp import ConfigurationSet

if TYPE_CHECKING:
    from .bus import SenderHandle
    from .dsl import RouteGraph, Scenario
    from .world import World


class PartKind(enum.Enum):
    CONTEXT = "CONTEXT"
    SUT = "SUT"
    OBSERVER = "OBSERVER"


class ControlledClock:
    """Simulation time in µs, advanced only by the run loop in whole steps."""

    def __init__(self, step: int = 10_000):
        if step <= 0:
            raise ValueError("clock step must be positive")
        self.step = step
        self._now = 0

    @property
    def now(self) -> int:
        return self._now

    def advance(self) -> int:
        self._now += self.step
        return self._now


@dataclass
class PartContext:
    """What a part gets at setup.

    ``world`` is only handed to CONTEXT parts; ``bus`` is read-only for
    OBSERVER parts.  ``config`` is the DMCP-delivered subset for SUT parts and
    the master configuration otherwise.
    """

    bus: "SenderHandle"
    clock: ControlledClock
    config: ConfigurationSet = field(default_factory=ConfigurationSet)
    scenario: "Scenario | None" = None
    graph: "RouteGraph | None" = None
    vehicle_id: int | None = None
    world: "World | None" = None
    rng: np.random.Generator | None = None


class SystemPart:
    """Base class for everything the run loop steps.

    Subclasses set ``kind`` and override the hooks they need.  ``finish`` is
    called on OBSERVER parts once more after the final delivery point.
    """

    kind: PartKind = PartKind.SUT
    name: str = "part"

    def setup(self, ctx: PartContext) -> None:
        pass

    def step(self, now: int) -> None:
        pass

    def finish(self, now: int) -> None:
        pass

    def teardown(self) -> None:
        pass

    def __repr__(self):
        return f"<{type(self).__name__} {self.name} ({self.kind.value})>"
