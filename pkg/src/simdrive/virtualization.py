"""The run loop: owns simulated time and all communication during a run.

Each slice, in fixed order:

1. deliver every container sent during the previous slice;
2. step CONTEXT parts, then 3. SUT parts, then 4. OBSERVER parts,
   each group in registration order.

After the last slice one more delivery point flushes the final sends to the
observers.  Nothing here reads the wall clock.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence, TextIO

import numpy as np

from .bus import FIFOStore, InProcessConference
from .dmcp import ConfigurationSet, DiscoveryTimeout, DmcpClient, LifecycleState, ModuleDescriptor, Supercomponent
from .dsl.model import Scenario, Situation
from .dsl.routing import RouteGraph
from .dsl.validate import validate
from .messages import VEHICLE_STATE_TYPE, VehicleStateMsg
from .recording import Recorder
from .parts import ControlledClock, PartContext, PartKind, SystemPart
from .validators import ValidatorPart, Verdict, Validator, build_suite
from .world import SensorContext, SetupError, VehicleContext, World

log = logging.getLogger(__name__)


@dataclass
class RunConfiguration:
    seed: int
    scenario: Scenario | None = None
    situation: Situation | None = None
    duration: float = 60.0  # simulation seconds
    step: int = 10_000  # µs
    config: ConfigurationSet = field(default_factory=ConfigurationSet)
    suite: ConfigurationSet | None = None
    validators: Sequence[Validator] | None = None
    recording: Path | None = None
    stop_when_final: bool = False

    @property
    def duration_us(self) -> int:
        return round(self.duration * 1e6)

    def check(self) -> None:
        if self.step <= 0:
            raise SetupError("step must be positive")
        if self.duration_us < 0 or self.duration_us % self.step:
            raise SetupError(f"duration {self.duration} s is not a multiple of the {self.step} µs step")
        if self.situation is not None and self.scenario is None:
            raise SetupError("a situation needs its scenario")
        problems = []
        if self.scenario is not None:
            problems += validate(self.scenario)
        if self.situation is not None:
            problems += validate(self.situation, self.scenario)
        if problems:
            raise SetupError("invalid models:\n" + "\n".join(f"  {p}" for p in problems))


@dataclass(frozen=True)
class Abort:
    part: str
    slice: int
    error: str


@dataclass
class RunReport:
    verdicts: list[Verdict]
    slices: int
    simtime: int
    abort: Abort | None = None

    @property
    def passed(self) -> bool:
        return self.abort is None and all(v.passed for v in self.verdicts)

    @property
    def vacuous(self) -> bool:
        return self.passed and not self.verdicts

    def verdicts_for(self, vehicle_id: int) -> list[Verdict]:
        return [v for v in self.verdicts if v.vehicle_id == vehicle_id]

    def lines(self) -> list[str]:
        out = [v.line() for v in self.verdicts]
        if self.abort is not None:
            out.append(f"ABORT part={self.abort.part} slice={self.abort.slice} {self.abort.error}")
        out.append(f"RUN {'PASSED' if self.passed else 'FAILED'} slices={self.slices} simtime={self.simtime}")
        return out

    def to_text(self) -> str:
        return "\n".join(self.lines()) + "\n"


class TraceDumper(SystemPart):
    """Observer writing every delivered vehicle state as a CSV line, for external plotting."""

    kind = PartKind.OBSERVER
    name = "tracedumper"
    HEADER = "timestamp,vehicle,external,x,y,heading,speed,steering\n"

    def __init__(self, fp: TextIO):
        self.fp = fp

    def setup(self, ctx: PartContext) -> None:
        self.inbox = FIFOStore()
        ctx.bus.add_listener({VEHICLE_STATE_TYPE}, self.inbox)
        self.fp.write(self.HEADER)

    def step(self, now: int) -> None:
        for c in self.inbox.drain():
            m = c.unpack(VehicleStateMsg)
            self.fp.write(f"{m.timestamp},{m.vehicle_id},{int(m.external)},{m.x!r},{m.y!r},"
                          f"{m.heading!r},{m.speed!r},{m.steering!r}\n")

    finish = step


class _PartFailed(Exception):
    def __init__(self, part: SystemPart, exc: BaseException):
        self.part = part
        self.exc = exc


class Simulation:
    """One run: bus, clock, world, embedded supercomponent and the registered parts."""

    def __init__(self, config: RunConfiguration):
        config.check()
        self.config = config
        self.bus = InProcessConference()
        self.clock = ControlledClock(config.step)
        self.rng = np.random.default_rng(config.seed % 2**64)
        self.world: World | None = None
        self.graph: RouteGraph | None = None
        if config.scenario is not None:
            self.graph = RouteGraph.from_scenario(config.scenario)
            self.world = World(config.scenario, config.situation, self.graph)
        self.parts: list[tuple[SystemPart, int | None]] = []
        self.supercomponent = Supercomponent(self.bus.handle("supercomponent"), config.config)
        self.validator_part: ValidatorPart | None = None
        if self.world is not None:
            self.add(VehicleContext())
            self.add(SensorContext())

    @property
    def external_vehicles(self) -> list[int]:
        return sorted(self.world.external) if self.world else []

    def add(self, part: SystemPart, vehicle_id: int | None = None) -> SystemPart:
        self.parts.append((part, vehicle_id))
        return part

    def _ordered(self, kind: PartKind) -> list[tuple[SystemPart, int | None]]:
        return [(p, v) for p, v in self.parts if p.kind is kind]

    def _setup(self) -> dict[int, DmcpClient]:
        cfg = self.config
        if cfg.validators is not None or cfg.suite is not None:
            validators = list(cfg.validators or [])
            if cfg.suite is not None:
                if self.graph is None:
                    raise SetupError("a validator suite needs a scenario")
                validators += build_suite(cfg.suite, self.graph, self.external_vehicles)
            self.validator_part = ValidatorPart(validators)
            # validators observe before any other observer so recorder order is unaffected
            self.parts.insert(0, (self.validator_part, None))

        # handles in registration order fix the delivery order of senders
        ordered = (self._ordered(PartKind.CONTEXT) + self._ordered(PartKind.SUT)
                   + self._ordered(PartKind.OBSERVER))
        handles = {id(p): self.bus.handle(p.name, read_only=p.kind is PartKind.OBSERVER) for p, _ in ordered}

        def pump():
            self.bus.deliver()
            self.supercomponent.process(self.clock.now)
            self.bus.deliver()

        clients: dict[int, DmcpClient] = {}
        for index, (part, vid) in enumerate(ordered):
            ctx = PartContext(handles[id(part)], self.clock, cfg.config, cfg.scenario, self.graph, vid)
            if part.kind is PartKind.CONTEXT:
                ctx.world = self.world
                ctx.rng = self.rng
            elif part.kind is PartKind.SUT:
                desc = ModuleDescriptor(part.name, vid if vid is not None else index)
                client = DmcpClient(ctx.bus, desc, pump=pump)
                try:
                    ctx.config = client.discover(self.clock.now)
                except DiscoveryTimeout as exc:
                    raise SetupError(str(exc)) from exc
                clients[id(part)] = client
            try:
                part.setup(ctx)
            except Exception as exc:
                raise SetupError(f"setup of {part.name} failed: {exc}") from exc
        return clients

    def _call(self, part: SystemPart, fn: Callable[[int], None], now: int) -> None:
        try:
            fn(now)
        except Exception as exc:
            raise _PartFailed(part, exc) from exc

    def run(self) -> RunReport:
        if self.config.recording is None:
            return self._run()
        with open(self.config.recording, "wb") as fp:
            self.add(Recorder(fp))
            return self._run()

    def _run(self) -> RunReport:
        clients = self._setup()
        contexts = [p for p, _ in self._ordered(PartKind.CONTEXT)]
        suts = [p for p, _ in self._ordered(PartKind.SUT)]
        observers = [p for p, _ in self._ordered(PartKind.OBSERVER)]
        n_slices = self.config.duration_us // self.config.step
        pulse_every = self.supercomponent.pulse_interval_us
        abort = None
        slices = 0
        try:
            for k in range(n_slices):
                now = self.clock.now
                current = k
                self.bus.deliver()
                self.supercomponent.process(now)
                for p in contexts:
                    self._call(p, p.step, now)
                for p in suts:
                    if now % pulse_every == 0:
                        clients[id(p)].pulse(now)
                    self._call(p, p.step, now)
                for p in observers:
                    self._call(p, p.step, now)
                slices = k + 1
                self.clock.advance()
                if (self.config.stop_when_final and self.validator_part is not None
                        and self.validator_part.all_final):
                    break
        except _PartFailed as failed:
            log.error("part %s failed in slice %d: %s", failed.part.name, current, failed.exc)
            abort = Abort(failed.part.name, current, f"{type(failed.exc).__name__}: {failed.exc}")
            if self.clock.now == current * self.config.step:
                self.clock.advance()

        end = self.clock.now
        for p in suts:
            clients[id(p)].pulse(end, LifecycleState.TERMINATED)
        self.bus.deliver()
        self.supercomponent.process(end)
        for p in observers:
            try:
                p.finish(end)
            except Exception as exc:
                if abort is None:
                    abort = Abort(p.name, slices, f"{type(exc).__name__}: {exc}")
        for p, _ in self.parts:
            try:
                p.teardown()
            except Exception:
                log.exception("teardown of %s failed", p.name)
        verdicts = self.validator_part.verdicts if self.validator_part else []
        return RunReport(verdicts, slices, end, abort)


def run(config: RunConfiguration, parts: Sequence[SystemPart] = ()) -> RunReport:
    """Run ``parts`` in a fresh simulation.

    SUT parts are bound to the situation's first external vehicle, if any.
    """
    sim = Simulation(config)
    vehicles = sim.external_vehicles
    for p in parts:
        sim.add(p, vehicles[0] if p.kind is PartKind.SUT and vehicles else None)
    return sim.run()


SutFactory = Callable[[int], "SystemPart | Sequence[SystemPart]"]


def run_multi_vehicle(config: RunConfiguration, sut_factories: Sequence[SutFactory],
                      extra_parts: Sequence[SystemPart] = ()) -> RunReport:
    """One independent SUT per external vehicle, all sharing world, clock and bus.

    Factories are paired with external-driver objects in ascending object id
    order and called with that vehicle's id.
    """
    sim = Simulation(config)
    vehicles = sim.external_vehicles
    if len(vehicles) != len(sut_factories):
        raise SetupError(f"{len(sut_factories)} SUT factories for {len(vehicles)} externally driven vehicles")
    for p in extra_parts:
        sim.add(p)
    for vid, factory in zip(vehicles, sut_factories):
        made = factory(vid)
        for p in ([made] if isinstance(made, SystemPart) else made):
            if p.kind is not PartKind.SUT:
                raise SetupError(f"factory for vehicle {vid} returned non-SUT part {p.name}")
            sim.add(p, vid)
    return sim.run()
