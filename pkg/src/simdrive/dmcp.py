"""Dynamic module configuration and lifecycle supervision.

A supercomponent owns the master :class:`ConfigurationSet`.  Components
broadcast a DISCOVER container and receive the slice of the configuration
meant for them (``global.*``, ``<name>.*`` and instance overrides
``<name>:<instance>.*``).  Afterwards they pulse periodically; a component
that stays silent for ``timeoutpulses`` pulse intervals is marked
UNRESPONSIVE.
"""
from __future__ import annotations

import enum
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterator, Mapping

from .bus import Empty, FIFOStore
from .serialization import Container, message, pack

log = logging.getLogger(__name__)

DISCOVER_TYPE = 1
CONFIG_RESPONSE_TYPE = 2
PULSE_TYPE = 3

DEFAULT_PULSE_INTERVAL = 1.0
DEFAULT_TIMEOUT_PULSES = 3

_KEY_RE = re.compile(r"^[a-z0-9_-]+(:[0-9]+)?(\.[a-z0-9_-]+)+$")


class ConfigError(ValueError):
    pass


class DiscoveryTimeout(Exception):
    pass


class ConfigurationSet(Mapping[str, str]):
    """Ordered ``key=value`` configuration with dotted lowercase keys."""

    def __init__(self, entries: Mapping[str, str] | None = None):
        self._entries: dict[str, str] = {}
        for k, v in (entries or {}).items():
            if not _KEY_RE.match(k):
                raise ConfigError(f"invalid configuration key {k!r}")
            self._entries[k] = str(v)

    @classmethod
    def parse(cls, text: str) -> "ConfigurationSet":
        entries: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            if not _KEY_RE.match(key):
                raise ConfigError(f"line {lineno}: invalid key {key!r}")
            if key in entries:
                raise ConfigError(f"line {lineno}: duplicate key {key!r}")
            entries[key] = value
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "ConfigurationSet":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def dumps(self) -> str:
        return "".join(f"{k}={v}\n" for k, v in self._entries.items())

    def __getitem__(self, key: str) -> str:
        return self._entries[key]

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other):
        if isinstance(other, ConfigurationSet):
            return list(self._entries.items()) == list(other._entries.items())
        return NotImplemented

    def __repr__(self):
        return f"ConfigurationSet({self._entries!r})"

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self._entries:
            if default is None:
                raise ConfigError(f"missing configuration key {key!r}")
            return default
        try:
            return float(self._entries[key])
        except ValueError:
            raise ConfigError(f"{key}: {self._entries[key]!r} is not a number") from None

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self._entries:
            if default is None:
                raise ConfigError(f"missing configuration key {key!r}")
            return default
        try:
            return int(self._entries[key])
        except ValueError:
            raise ConfigError(f"{key}: {self._entries[key]!r} is not an integer") from None

    def with_prefix(self, prefix: str) -> dict[str, str]:
        """Entries under ``prefix.``, keyed by the remaining tail."""
        p = prefix + "."
        return {k[len(p):]: v for k, v in self._entries.items() if k.startswith(p)}

    def updated(self, entries: Mapping[str, str]) -> "ConfigurationSet":
        merged = dict(self._entries)
        merged.update(entries)
        return ConfigurationSet(merged)

    def for_module(self, name: str, instance_id: int = 0) -> "ConfigurationSet":
        """The subset delivered to module ``name``/``instance_id``."""
        out: dict[str, str] = {}
        overrides: dict[str, str] = {}
        own = name + "."
        inst = f"{name}:{instance_id}."
        for k, v in self._entries.items():
            if k.startswith("global.") or k.startswith(own):
                out[k] = v
            elif k.startswith(inst):
                overrides[own + k[len(inst):]] = v
        out.update(overrides)
        return ConfigurationSet(out)


@dataclass(frozen=True)
class ModuleDescriptor:
    name: str
    instance_id: int = 0
    version: str = ""

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.instance_id)


class LifecycleState(enum.Enum):
    DISCOVERED = "DISCOVERED"
    CONFIGURED = "CONFIGURED"
    RUNNING = "RUNNING"
    UNRESPONSIVE = "UNRESPONSIVE"
    TERMINATED = "TERMINATED"


_TRANSITIONS = {
    LifecycleState.DISCOVERED: {LifecycleState.CONFIGURED},
    LifecycleState.CONFIGURED: {LifecycleState.RUNNING},
    LifecycleState.RUNNING: {LifecycleState.UNRESPONSIVE, LifecycleState.TERMINATED},
    LifecycleState.UNRESPONSIVE: {LifecycleState.RUNNING, LifecycleState.TERMINATED},
    LifecycleState.TERMINATED: set(),
}


def can_transition(src: LifecycleState, dst: LifecycleState) -> bool:
    return dst in _TRANSITIONS[src]


# -- wire messages ------------------------------------------------------------

@message(DISCOVER_TYPE, framework=True)
@dataclass(frozen=True)
class DiscoverMsg:
    name: str = ""
    instance_id: int = 0
    version: str = ""


@message(CONFIG_RESPONSE_TYPE, framework=True)
@dataclass(frozen=True)
class ConfigResponseMsg:
    name: str = ""
    instance_id: int = 0
    keys: list[str] = field(default_factory=list)
    values: list[str] = field(default_factory=list)


@message(PULSE_TYPE, framework=True)
@dataclass(frozen=True)
class PulseMsg:
    name: str = ""
    instance_id: int = 0
    state: str = ""
    timestamp: int = 0


@dataclass
class Supervision:
    descriptor: ModuleDescriptor
    state: LifecycleState
    last_seen: int  # µs


class Supercomponent:
    """Answers DISCOVER requests and tracks component lifecycles.

    ``endpoint`` is anything with ``send(container)`` and
    ``add_listener(filter, store)``: a live conference or an in-process
    sender handle.  The supercomponent is event-serialized; call
    :meth:`process` from a single thread.
    """

    def __init__(self, endpoint, config: ConfigurationSet):
        self.endpoint = endpoint
        self.config = config
        self.pulse_interval_us = round(config.get_float("global.dmcp.pulseinterval", DEFAULT_PULSE_INTERVAL) * 1e6)
        self.timeout_pulses = config.get_int("global.dmcp.timeoutpulses", DEFAULT_TIMEOUT_PULSES)
        self.table: dict[tuple[str, int], Supervision] = {}
        self.terminated: dict[tuple[str, int], ModuleDescriptor] = {}
        self._inbox = FIFOStore()
        endpoint.add_listener({DISCOVER_TYPE, PULSE_TYPE}, self._inbox)

    def process(self, now: int) -> None:
        """Handle every queued DMCP message, then run a supervision check."""
        for c in self._inbox.drain():
            if c.data_type_id == DISCOVER_TYPE:
                self._on_discover(c.unpack(DiscoverMsg), now)
            else:
                p = c.unpack(PulseMsg)
                try:
                    state = LifecycleState(p.state)
                except ValueError:
                    log.warning("ignoring pulse from %s/%d with unknown state %r", p.name, p.instance_id, p.state)
                    continue
                self.pulse(ModuleDescriptor(p.name, p.instance_id), state, p.timestamp)
        self.check(now)

    def _on_discover(self, msg: DiscoverMsg, now: int) -> None:
        desc = ModuleDescriptor(msg.name, msg.instance_id, msg.version)
        entry = Supervision(desc, LifecycleState.DISCOVERED, now)
        self.table[desc.key] = entry
        self.terminated.pop(desc.key, None)
        subset = self.config.for_module(desc.name, desc.instance_id)
        reply = ConfigResponseMsg(desc.name, desc.instance_id, list(subset.keys()), list(subset.values()))
        self.endpoint.send(pack(reply, now))
        entry.state = LifecycleState.CONFIGURED

    def pulse(self, descriptor: ModuleDescriptor, state: LifecycleState, timestamp: int) -> None:
        entry = self.table.get(descriptor.key)
        if entry is None:
            log.warning("protocol warning: pulse from unknown component %s:%d", *descriptor.key)
            return
        entry.last_seen = max(entry.last_seen, timestamp)
        if state is LifecycleState.TERMINATED:
            del self.table[descriptor.key]
            self.terminated[descriptor.key] = entry.descriptor
        elif state is LifecycleState.RUNNING and entry.state in (LifecycleState.CONFIGURED, LifecycleState.UNRESPONSIVE):
            entry.state = LifecycleState.RUNNING

    def check(self, now: int) -> None:
        limit = self.timeout_pulses * self.pulse_interval_us
        for entry in self.table.values():
            if entry.state is LifecycleState.RUNNING and now - entry.last_seen >= limit:
                log.info("component %s:%d is unresponsive", *entry.descriptor.key)
                entry.state = LifecycleState.UNRESPONSIVE

    def state_of(self, descriptor: ModuleDescriptor) -> LifecycleState | None:
        if descriptor.key in self.terminated:
            return LifecycleState.TERMINATED
        entry = self.table.get(descriptor.key)
        return entry.state if entry else None


class DmcpClient:
    """Component side of DMCP.

    With a live conference, :meth:`discover` blocks up to ``timeout`` seconds
    per attempt.  On the in-process transport pass ``pump``, a callable that
    drives delivery (and the supercomponent) once; no wall-clock waiting
    happens then.
    """

    def __init__(self, endpoint, descriptor: ModuleDescriptor, *, attempts: int = 3, timeout: float = 1.0,
                 pump: Callable[[], None] | None = None):
        self.endpoint = endpoint
        self.descriptor = descriptor
        self.attempts = attempts
        self.timeout = timeout
        self.pump = pump
        self.state = LifecycleState.DISCOVERED
        self.config: ConfigurationSet | None = None
        self._inbox = FIFOStore()
        self._reg = endpoint.add_listener({CONFIG_RESPONSE_TYPE}, self._inbox)

    def _match(self, c: Container) -> ConfigResponseMsg | None:
        r = c.unpack(ConfigResponseMsg)
        if (r.name, r.instance_id) == self.descriptor.key:
            return r
        return None

    def discover(self, now: int = 0) -> ConfigurationSet:
        d = self.descriptor
        request = pack(DiscoverMsg(d.name, d.instance_id, d.version), now)
        for _ in range(self.attempts):
            self.endpoint.send(request)
            reply = self._await_reply()
            if reply is not None:
                if len(reply.keys) != len(reply.values):
                    raise ConfigError("malformed configuration response")
                self.config = ConfigurationSet(dict(zip(reply.keys, reply.values)))
                self.state = LifecycleState.CONFIGURED
                return self.config
        raise DiscoveryTimeout(
            f"{d.name}:{d.instance_id} got no configuration after {self.attempts} attempts; refusing to start"
        )

    def _await_reply(self) -> ConfigResponseMsg | None:
        if self.pump is not None:
            self.pump()
            for c in self._inbox.drain():
                reply = self._match(c)
                if reply is not None:
                    return reply
            return None
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return None
            try:
                c = self._inbox.take(timeout=remaining)
            except Empty:
                return None
            reply = self._match(c)
            if reply is not None:
                return reply

    def pulse(self, timestamp: int, state: LifecycleState = LifecycleState.RUNNING) -> None:
        if self.state is LifecycleState.DISCOVERED:
            raise RuntimeError("pulse before discovery")
        d = self.descriptor
        self.endpoint.send(pack(PulseMsg(d.name, d.instance_id, state.value, timestamp), timestamp))
        self.state = state

    def close(self) -> None:
        self._reg.remove()
