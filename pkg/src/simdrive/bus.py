"""Conference bus: untyped conferences carrying typed Containers.

Two transports share the listener/data-store contract:

* :class:`InProcessConference` -- deterministic, externally driven.  Sends are
  queued per sender and fanned out to listeners only at explicit delivery
  points (:meth:`InProcessConference.deliver`), ordered by sender registration
  order and then per-sender send order.
* :class:`UdpConference` -- live UDP multicast on ``239.255.42.<group>:12175``.
  One datagram per container frame, one background receive loop.

Senders receive their own containers on both transports.
"""
from __future__ import annotations

import collections
import enum
import logging
import socket
import struct
import threading
from dataclasses import dataclass
from typing import Iterable, Protocol

from .serialization import Container, MalformedFrame

log = logging.getLogger(__name__)

MULTICAST_PREFIX = "239.255.42."
PORT = 12175
MAX_DATAGRAM = 65507


class BusError(Exception):
    pass


class SendError(BusError):
    pass


class TransportError(BusError):
    pass


class ReadOnlyHandleError(BusError):
    """Raised when an observer tries to send."""


@dataclass(frozen=True)
class ConferenceId:
    group: int

    def __post_init__(self):
        if not 1 <= self.group <= 254:
            raise ValueError(f"conference group must be in 1..254, got {self.group}")

    @property
    def address(self) -> str:
        return f"{MULTICAST_PREFIX}{self.group}"

    @property
    def port(self) -> int:
        return PORT


# -- data stores --------------------------------------------------------------

class StoreKind(enum.Enum):
    FIFO = "FIFO"
    LIFO = "LIFO"
    KEYVALUE = "KEYVALUE"


class Empty(Exception):
    pass


class DataStore:
    """Thread-safe container store; the synchronization boundary between a
    receive loop (producer) and a component (consumer)."""

    kind: StoreKind

    def __init__(self, capacity: int | None = None):
        if capacity is not None and capacity <= 0:
            raise ValueError("capacity must be positive or None for unbounded")
        self.capacity = capacity
        self._cond = threading.Condition()

    def put(self, container: Container) -> None:
        with self._cond:
            self._put(container)
            self._cond.notify()

    def take(self, timeout: float | None = 0.0) -> Container:
        """Remove and return the next container.

        ``timeout=0`` never blocks, ``None`` blocks forever.  Raises
        :class:`Empty` when nothing arrived in time.
        """
        with self._cond:
            if not self._cond.wait_for(lambda: len(self) > 0, timeout=timeout):
                raise Empty()
            return self._take()

    def drain(self) -> list[Container]:
        with self._cond:
            out = []
            while len(self):
                out.append(self._take())
            return out

    def _put(self, container: Container) -> None:
        raise NotImplementedError

    def _take(self) -> Container:
        raise NotImplementedError


class FIFOStore(DataStore):
    kind = StoreKind.FIFO

    def __init__(self, capacity: int | None = None):
        super().__init__(capacity)
        # deque(maxlen) drops the oldest entry when full
        self._q: collections.deque[Container] = collections.deque(maxlen=capacity)

    def _put(self, container):
        self._q.append(container)

    def _take(self):
        return self._q.popleft()

    def drain(self) -> list[Container]:
        with self._cond:
            out = list(self._q)
            self._q.clear()
            return out

    def __len__(self):
        return len(self._q)


class LIFOStore(DataStore):
    kind = StoreKind.LIFO

    def __init__(self, capacity: int | None = None):
        super().__init__(capacity)
        self._q: collections.deque[Container] = collections.deque(maxlen=capacity)

    def _put(self, container):
        self._q.append(container)

    def _take(self):
        return self._q.pop()

    def __len__(self):
        return len(self._q)


class KeyValueStore(DataStore):
    """Keeps only the latest container per dataTypeId."""

    kind = StoreKind.KEYVALUE

    def __init__(self, capacity: int | None = None):
        super().__init__(capacity)
        self._map: dict[int, Container] = {}

    def _put(self, container):
        if (
            self.capacity is not None
            and container.data_type_id not in self._map
            and len(self._map) >= self.capacity
        ):
            # evict the entry updated longest ago
            del self._map[next(iter(self._map))]
        self._map.pop(container.data_type_id, None)
        self._map[container.data_type_id] = container

    def _take(self):
        key = next(iter(self._map))
        return self._map.pop(key)

    def __len__(self):
        return len(self._map)

    def get(self, data_type_id: int) -> Container | None:
        with self._cond:
            return self._map.get(data_type_id)

    def snapshot(self) -> dict[int, Container]:
        with self._cond:
            return dict(self._map)


def make_store(kind: StoreKind | str, capacity: int | None = None) -> DataStore:
    kind = StoreKind(kind)
    return {StoreKind.FIFO: FIFOStore, StoreKind.LIFO: LIFOStore, StoreKind.KEYVALUE: KeyValueStore}[kind](capacity)


# -- listeners ----------------------------------------------------------------

class _All:
    def __repr__(self):
        return "ALL"


ALL = _All()


class Sink(Protocol):
    def put(self, container: Container) -> None: ...


@dataclass(eq=False)
class Registration:
    conference: "Conference"
    types: frozenset[int] | None  # None means ALL
    store: Sink

    def matches(self, data_type_id: int) -> bool:
        return self.types is None or data_type_id in self.types

    def remove(self) -> None:
        self.conference.remove_listener(self)


class Conference:
    def __init__(self):
        self._listeners: list[Registration] = []
        self._lock = threading.Lock()

    def add_listener(self, filter: Iterable[int] | _All, store: Sink) -> Registration:
        if filter is ALL:
            types = None
        else:
            types = frozenset(filter)
            if not types:
                raise ValueError("listener filter must be ALL or a non-empty set of dataTypeIds")
        with self._lock:
            if any(r.store is store for r in self._listeners):
                raise BusError("store is already registered on this conference")
            reg = Registration(self, types, store)
            self._listeners.append(reg)
        return reg

    def remove_listener(self, reg: Registration) -> None:
        with self._lock:
            self._listeners.remove(reg)

    @property
    def listeners(self) -> list[Registration]:
        return list(self._listeners)

    def _fan_out(self, container: Container) -> None:
        for reg in self._listeners:
            if reg.matches(container.data_type_id):
                reg.store.put(container)

    def send(self, container: Container) -> None:
        raise NotImplementedError


# -- in-process transport -----------------------------------------------------

class SenderHandle:
    """A named sender on an in-process conference."""

    def __init__(self, conference: "InProcessConference", name: str, read_only: bool = False):
        self.conference = conference
        self.name = name
        self.read_only = read_only
        self._pending: list[Container] = []
        self.sent_count = 0

    def send(self, container: Container) -> None:
        if self.read_only:
            raise ReadOnlyHandleError(f"{self.name} is an observer and cannot send")
        self._pending.append(container)
        self.sent_count += 1

    def add_listener(self, filter, store: Sink) -> Registration:
        return self.conference.add_listener(filter, store)

    def __repr__(self):
        return f"SenderHandle({self.name!r}{', read-only' if self.read_only else ''})"


class InProcessConference(Conference):
    def __init__(self):
        super().__init__()
        self._senders: list[SenderHandle] = []
        self._default: SenderHandle | None = None
        self.delivered_count = 0

    def handle(self, name: str, read_only: bool = False) -> SenderHandle:
        h = SenderHandle(self, name, read_only)
        self._senders.append(h)
        return h

    def send(self, container: Container) -> None:
        if self._default is None:
            self._default = self.handle("<default>")
        self._default.send(container)

    @property
    def pending(self) -> int:
        return sum(len(h._pending) for h in self._senders)

    def deliver(self) -> int:
        """Fan out every queued container; return how many were delivered."""
        batch: list[Container] = []
        for h in self._senders:
            if h._pending:
                batch.extend(h._pending)
                h._pending = []
        for c in batch:
            self._fan_out(c)
        self.delivered_count += len(batch)
        return len(batch)


# -- UDP multicast transport --------------------------------------------------

class UdpConference(Conference):
    """Live conference on a UDP multicast group.

    ``loopback=True`` binds the multicast traffic to 127.0.0.1, which is what
    the tests use.
    """

    def __init__(self, conference: ConferenceId | int, loopback: bool = False, ttl: int = 1):
        super().__init__()
        if isinstance(conference, int):
            conference = ConferenceId(conference)
        self.id = conference
        self.loopback = loopback
        iface = "127.0.0.1" if loopback else "0.0.0.0"
        try:
            self._tx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
            self._tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_TTL, ttl)
            self._tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_LOOP, 1)
            if loopback:
                self._tx.setsockopt(socket.IPPROTO_IP, socket.IP_MULTICAST_IF, socket.inet_aton(iface))

            self._rx = socket.socket(socket.AF_INET, socket.SOCK_DGRAM, socket.IPPROTO_UDP)
            self._rx.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            if hasattr(socket, "SO_REUSEPORT"):
                self._rx.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEPORT, 1)
            self._rx.bind(("", conference.port))
            mreq = struct.pack("4s4s", socket.inet_aton(conference.address), socket.inet_aton(iface))
            self._rx.setsockopt(socket.IPPROTO_IP, socket.IP_ADD_MEMBERSHIP, mreq)
            self._rx.settimeout(0.1)
        except OSError as exc:
            raise TransportError(f"cannot open conference {conference.group}: {exc}") from exc
        self.sent_datagrams = 0
        self.received_datagrams = 0
        self._running = True
        self._thread = threading.Thread(target=self._receive_loop, name=f"conference-{conference.group}", daemon=True)
        self._thread.start()

    def send(self, container: Container) -> None:
        self.send_frame(container.to_bytes())

    def send_frame(self, frame: bytes) -> None:
        if len(frame) > MAX_DATAGRAM:
            raise SendError(f"frame of {len(frame)} bytes exceeds the UDP limit of {MAX_DATAGRAM}")
        try:
            self._tx.sendto(frame, (self.id.address, self.id.port))
        except OSError as exc:
            raise TransportError(str(exc)) from exc
        self.sent_datagrams += 1

    def _receive_loop(self) -> None:
        while self._running:
            try:
                data, _ = self._rx.recvfrom(MAX_DATAGRAM + 1)
            except socket.timeout:
                continue
            except OSError:
                if self._running:
                    log.exception("receive failed on conference %d", self.id.group)
                break
            self.received_datagrams += 1
            try:
                container = Container.from_bytes(data)
            except MalformedFrame as exc:
                log.warning("dropping malformed datagram: %s", exc)
                continue
            self._fan_out(container)

    def close(self) -> None:
        self._running = False
        self._thread.join(timeout=1.0)
        try:
            mreq = struct.pack(
                "4s4s", socket.inet_aton(self.id.address),
                socket.inet_aton("127.0.0.1" if self.loopback else "0.0.0.0"),
            )
            self._rx.setsockopt(socket.IPPROTO_IP, socket.IP_DROP_MEMBERSHIP, mreq)
        except OSError:
            pass
        self._rx.close()
        self._tx.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
