"""Recording files: a stream of ``captureTimestamp (i64 LE) | container frame`` entries.

No index, no file header; an empty file is an empty recording.
"""
from __future__ import annotations

import logging
import struct
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Callable, Iterator

from .bus import ALL, FIFOStore, Empty
from .parts import PartContext, PartKind, SystemPart
from .serialization import HEADER, HEADER_SIZE, MAGIC, Container

log = logging.getLogger(__name__)

TIMESTAMP = struct.Struct("<q")


class RecordingError(ValueError):
    def __init__(self, offset: int, message: str):
        super().__init__(f"recording error at byte {offset}: {message}")
        self.offset = offset


@dataclass(frozen=True)
class Entry:
    timestamp: int
    container: Container
    frame: bytes  # verbatim frame bytes


class RecordingWriter:
    def __init__(self, fp: BinaryIO):
        self.fp = fp
        self.last_timestamp: int | None = None
        self.entries = 0

    def write(self, timestamp: int, frame: bytes | Container) -> None:
        if isinstance(frame, Container):
            frame = frame.to_bytes()
        if self.last_timestamp is not None and timestamp < self.last_timestamp:
            raise ValueError(f"capture timestamps must not decrease ({timestamp} < {self.last_timestamp})")
        self.fp.write(TIMESTAMP.pack(timestamp) + frame)
        self.last_timestamp = timestamp
        self.entries += 1


def iter_entries(fp: BinaryIO) -> Iterator[Entry]:
    """Stream entries from an open binary file."""
    offset = 0
    last = None
    while True:
        head = fp.read(TIMESTAMP.size + HEADER_SIZE)
        if not head:
            return
        if len(head) < TIMESTAMP.size + HEADER_SIZE:
            raise RecordingError(offset, "truncated entry header")
        (ts,) = TIMESTAMP.unpack_from(head)
        magic, type_id, sent, plen = HEADER.unpack_from(head, TIMESTAMP.size)
        if magic != MAGIC:
            raise RecordingError(offset + TIMESTAMP.size, f"bad magic 0x{magic:08x}")
        if last is not None and ts < last:
            raise RecordingError(offset, f"capture timestamp {ts} decreases")
        payload = fp.read(plen)
        if len(payload) < plen:
            raise RecordingError(offset + len(head), f"payload truncated ({len(payload)} of {plen} bytes)")
        frame = head[TIMESTAMP.size:] + payload
        yield Entry(ts, Container(type_id, sent, payload), frame)
        last = ts
        offset += len(head) + plen


def read_recording(path: str | Path) -> Iterator[Entry]:
    with open(path, "rb") as fp:
        yield from iter_entries(fp)


class Recorder(SystemPart):
    """Observer that appends every delivered container with its delivery time."""

    kind = PartKind.OBSERVER
    name = "recorder"

    def __init__(self, fp: BinaryIO):
        self.writer = RecordingWriter(fp)

    def setup(self, ctx: PartContext) -> None:
        self.inbox = FIFOStore()
        ctx.bus.add_listener(ALL, self.inbox)

    def step(self, now: int) -> None:
        for c in self.inbox.drain():
            self.writer.write(now, c)

    finish = step


def record_live(conference, fp: BinaryIO, stop: threading.Event, clock: Callable[[], float] = time.time,
                poll: float = 0.05) -> int:
    """Record a live conference until ``stop`` is set; return the entry count.

    Capture timestamps are wall-clock µs at receipt.
    """
    store = FIFOStore()
    reg = conference.add_listener(ALL, store)
    writer = RecordingWriter(fp)
    try:
        while not stop.is_set() or len(store):
            try:
                c = store.take(timeout=poll)
            except Empty:
                continue
            writer.write(max(int(clock() * 1e6), writer.last_timestamp or 0), c)
    finally:
        reg.remove()
    return writer.entries


def play(path: str | Path, send_frame: Callable[[bytes], None], time_scale: float = 1.0,
         sleep: Callable[[float], None] = time.sleep, clock: Callable[[], float] = time.monotonic) -> int:
    """Re-send every recorded frame verbatim; return how many were sent.

    Gaps between entries are replayed as ``gap / time_scale`` seconds;
    ``time_scale == 0`` sends as fast as possible.
    """
    if time_scale < 0:
        raise ValueError("time scale must be >= 0")
    sent = 0
    first_ts = None
    start = clock()
    for entry in read_recording(path):
        if time_scale > 0:
            if first_ts is None:
                first_ts = entry.timestamp
            due = start + (entry.timestamp - first_ts) / 1e6 / time_scale
            delay = due - clock()
            if delay > 0:
                sleep(delay)
        send_frame(entry.frame)
        sent += 1
    return sent


def payloads(path: str | Path) -> list[bytes]:
    """Frames of a recording without capture timestamps, for content comparison."""
    return [e.frame for e in read_recording(path)]

