"""Keyed binary serialization of records into Container frames.

Every record field is written as ``key | length | bytes`` where ``key`` is the
CRC-32 of the field name.  Readers build a key index over the payload and pick
the fields they know about, so field order does not matter, unknown fields are
skipped and missing fields fall back to their declared defaults.

Frame layout (all integers little-endian)::

    magic u32 = 0x48455350 | dataTypeId u32 | sentTimestamp i64 | payloadLength u32 | payload

Records are ordinary dataclasses decorated with :func:`message`.  Python types
map onto wire types as follows: ``bool`` -> 1 byte, ``int`` -> int64,
``float`` -> float64, ``str`` -> UTF-8, ``list[T]`` -> u32 count followed by
length-prefixed elements, nested message dataclass -> nested payload.  Other
integer widths are selected with ``Annotated[int, INT32]`` and friends, or the
:data:`Int32`, :data:`UInt32`, :data:`UInt64` aliases.
"""
from __future__ import annotations

import dataclasses
import functools
import struct
import typing
from dataclasses import dataclass, field
from typing import Annotated, Any, Iterator

import numpy as np

MAGIC = 0x48455350
HEADER = struct.Struct("<IIqI")
FIELD_HEADER = struct.Struct("<II")
HEADER_SIZE = HEADER.size  # 20
FIELD_HEADER_SIZE = FIELD_HEADER.size  # 8
U32 = struct.Struct("<I")

FRAMEWORK_TYPE_IDS = range(1, 100)
FIRST_USER_TYPE_ID = 100


class SchemaError(Exception):
    """A record type cannot be used as a schema."""


class EncodingError(ValueError):
    """A value cannot be encoded into its declared wire type."""

    def __init__(self, field: str, message: str):
        super().__init__(f"field {field!r}: {message}")
        self.field = field


class MalformedFrame(ValueError):
    """Bytes that do not form a valid frame or payload."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"malformed frame at byte {offset}: {message}")
        self.offset = offset


# -- field keys ---------------------------------------------------------------

def _make_crc_table() -> tuple[int, ...]:
    table = []
    for n in range(256):
        c = n
        for _ in range(8):
            c = (c >> 1) ^ 0xEDB88320 if c & 1 else c >> 1
        table.append(c)
    return tuple(table)


_CRC_TABLE = _make_crc_table()


def crc32(data: bytes) -> int:
    """Standard reflected CRC-32 (polynomial 0x04C11DB7)."""
    crc = 0xFFFFFFFF
    for b in data:
        crc = _CRC_TABLE[(crc ^ b) & 0xFF] ^ (crc >> 8)
    return crc ^ 0xFFFFFFFF


def field_key(name: str) -> int:
    """CRC-32 of the ASCII name; empty names are rejected later, when a schema is defined."""
    if not name.isascii():
        raise SchemaError(f"field name {name!r} is not ASCII")
    return crc32(name.encode("ascii"))


# -- wire types ---------------------------------------------------------------

@dataclass(frozen=True)
class Primitive:
    name: str
    fmt: str
    zero: Any
    lo: float | None = None
    hi: float | None = None

    @functools.cached_property
    def accepts(self) -> frozenset:
        """Exact value types the list fast path passes straight to struct."""
        if self.fmt == "?":
            return frozenset({bool})
        if self.fmt == "d":
            return frozenset({float, int})
        return frozenset({int})

    @functools.cached_property
    def codec(self) -> struct.Struct:
        return struct.Struct("<" + self.fmt)

    @functools.cached_property
    def size(self) -> int:
        return self.codec.size


BOOL = Primitive("bool", "?", False)
INT32 = Primitive("int32", "i", 0, -(2**31), 2**31 - 1)
INT64 = Primitive("int64", "q", 0, -(2**63), 2**63 - 1)
UINT32 = Primitive("uint32", "I", 0, 0, 2**32 - 1)
UINT64 = Primitive("uint64", "Q", 0, 0, 2**64 - 1)
FLOAT64 = Primitive("float64", "d", 0.0)


class _String:
    name = "string"
    zero = ""


STRING = _String()

Int32 = Annotated[int, INT32]
UInt32 = Annotated[int, UINT32]
UInt64 = Annotated[int, UINT64]


@dataclass(frozen=True)
class ListOf:
    element: Any

    @property
    def name(self) -> str:
        return f"list[{self.element.name}]"


@dataclass(frozen=True)
class RecordOf:
    schema: "Schema"

    @property
    def name(self) -> str:
        return self.schema.name


@dataclass(frozen=True)
class FieldSpec:
    name: str
    key: int
    type: Any
    default: Any = dataclasses.MISSING
    default_factory: Any = dataclasses.MISSING

    def default_value(self) -> Any:
        if self.default is not dataclasses.MISSING:
            return self.default
        if self.default_factory is not dataclasses.MISSING:
            return self.default_factory()
        return _zero(self.type)


def _zero(t: Any) -> Any:
    if isinstance(t, ListOf):
        return []
    if isinstance(t, RecordOf):
        return t.schema.default_record()
    return t.zero


class Schema:
    def __init__(self, cls: type, fields: list[FieldSpec], type_id: int | None = None):
        seen: dict[int, str] = {}
        for f in fields:
            if not f.name:
                raise SchemaError(f"{cls.__name__}: field name must not be empty")
            if f.key in seen:
                raise SchemaError(
                    f"{cls.__name__}: field keys of {seen[f.key]!r} and {f.name!r} collide"
                )
            seen[f.key] = f.name
        self.cls = cls
        self.name = cls.__name__
        self.fields = tuple(fields)
        self.type_id = type_id
        self._compile_flat()

    def _compile_flat(self) -> None:
        """Single-struct layout for records whose fields are all primitives.

        Used for canonical payloads only; anything else takes the generic path.
        """
        self.flat = None
        self.shareable = False
        if not self.fields or not all(isinstance(f.type, Primitive) for f in self.fields):
            return
        self.flat = struct.Struct("<" + "".join("II" + ("B" if f.type is BOOL else f.type.fmt) for f in self.fields))
        self.flat_keys = tuple(f.key for f in self.fields)
        self.flat_sizes = tuple(f.type.size for f in self.fields)
        self.flat_names = tuple(f.name for f in self.fields)
        self.flat_bools = tuple(i for i, f in enumerate(self.fields) if f.type is BOOL)
        self.flat_allowed = tuple(f.type.accepts for f in self.fields)
        # decoded flat frozen records are immutable, so a container may share them
        params = getattr(self.cls, "__dataclass_params__", None)
        self.shareable = bool(params and params.frozen)
        template: list[Any] = []
        for f in self.fields:
            template += [f.key, f.type.size, None]
        self.flat_template = template

    def default_record(self) -> Any:
        return self.cls(**{f.name: f.default_value() for f in self.fields})

    def __repr__(self) -> str:
        return f"Schema({self.name}, {[f.name for f in self.fields]})"


def _resolve_type(hint: Any, owner: str, fname: str) -> Any:
    origin = typing.get_origin(hint)
    if origin is Annotated:
        for meta in hint.__metadata__:
            if isinstance(meta, Primitive):
                return meta
        return _resolve_type(typing.get_args(hint)[0], owner, fname)
    if origin is list:
        (arg,) = typing.get_args(hint) or (None,)
        if arg is None:
            raise SchemaError(f"{owner}.{fname}: list needs an element type")
        return ListOf(_resolve_type(arg, owner, fname))
    if hint is bool:
        return BOOL
    if hint is int:
        return INT64
    if hint is float:
        return FLOAT64
    if hint is str:
        return STRING
    if isinstance(hint, type) and dataclasses.is_dataclass(hint):
        return RecordOf(schema_of(hint))
    raise SchemaError(f"{owner}.{fname}: unsupported field type {hint!r}")


def schema_of(cls: type) -> Schema:
    """Return (building on first use) the schema of a dataclass record type."""
    schema = cls.__dict__.get("__schema__")
    if schema is not None:
        return schema
    if not dataclasses.is_dataclass(cls):
        raise SchemaError(f"{cls!r} is not a dataclass")
    hints = typing.get_type_hints(cls, include_extras=True)
    fields = []
    for f in dataclasses.fields(cls):
        fields.append(
            FieldSpec(
                name=f.name,
                key=field_key(f.name),
                type=_resolve_type(hints[f.name], cls.__name__, f.name),
                default=f.default,
                default_factory=f.default_factory,
            )
        )
    schema = Schema(cls, fields)
    cls.__schema__ = schema
    return schema


_TYPE_REGISTRY: dict[int, type] = {}


def message(type_id: int | None = None, *, framework: bool = False):
    """Class decorator registering a dataclass as a serializable record.

    ``type_id`` becomes the Container dataTypeId used by :func:`encode`.  Ids
    1-99 are reserved for framework messages and need ``framework=True``.
    """

    def wrap(cls: type) -> type:
        if not dataclasses.is_dataclass(cls):
            cls = dataclass(cls)
        if type_id is not None:
            if not 0 < type_id < 2**32:
                raise SchemaError(f"dataTypeId {type_id} out of range")
            if (type_id in FRAMEWORK_TYPE_IDS) != framework:
                raise SchemaError(
                    f"dataTypeId {type_id}: 1-99 are reserved for framework messages, "
                    f"user types start at {FIRST_USER_TYPE_ID}"
                )
            other = _TYPE_REGISTRY.get(type_id)
            if other is not None and other.__qualname__ != cls.__qualname__:
                raise SchemaError(f"dataTypeId {type_id} already used by {other.__name__}")
            _TYPE_REGISTRY[type_id] = cls
        schema = schema_of(cls)
        schema.type_id = type_id
        return cls

    return wrap


def registered_type(type_id: int) -> type | None:
    return _TYPE_REGISTRY.get(type_id)


# -- encoding -----------------------------------------------------------------

@functools.lru_cache(maxsize=256)
def _list_struct(fmt: str, n: int) -> struct.Struct:
    """Count followed by ``n`` length-prefixed elements of format ``fmt``."""
    return struct.Struct("<I" + ("I" + fmt) * n)


_ARRAY_KINDS = {"?": "b", "d": "fiu"}


@functools.lru_cache(maxsize=None)
def _array_dtype(fmt: str) -> np.dtype:
    return np.dtype([("length", "<u4"), ("value", "<" + fmt)])


def _encode_array(el: Any, value: np.ndarray, fname: str) -> bytes:
    """A 1-D numpy array as a list of primitives; same bytes as the equivalent Python list."""
    if not isinstance(el, Primitive) or value.ndim != 1:
        raise EncodingError(fname, "only 1-D arrays of primitives can be encoded as lists")
    if value.dtype.kind not in _ARRAY_KINDS.get(el.fmt, "iu"):
        raise EncodingError(fname, f"array of {value.dtype} cannot encode list[{el.name}]")
    if el.lo is not None and len(value) and (value.min() < el.lo or value.max() > el.hi):
        raise EncodingError(fname, f"array values do not fit {el.name}")
    out = np.empty(len(value), dtype=_array_dtype(el.fmt))
    out["length"] = el.size
    out["value"] = value
    return U32.pack(len(value)) + out.tobytes()


def _encode_primitive(t: Primitive, value: Any, fname: str) -> bytes:
    if t is BOOL:
        if not isinstance(value, bool):
            raise EncodingError(fname, f"expected bool, got {type(value).__name__}")
        return b"\x01" if value else b"\x00"
    if t is FLOAT64:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EncodingError(fname, f"expected float, got {type(value).__name__}")
        return t.codec.pack(value)
    if isinstance(value, bool) or not isinstance(value, int):
        raise EncodingError(fname, f"expected int, got {type(value).__name__}")
    if not t.lo <= value <= t.hi:
        raise EncodingError(fname, f"{value} does not fit {t.name}")
    return t.codec.pack(value)


def _encode_value(t: Any, value: Any, fname: str) -> bytes:
    if isinstance(t, Primitive):
        return _encode_primitive(t, value, fname)
    if t is STRING:
        if not isinstance(value, str):
            raise EncodingError(fname, f"expected str, got {type(value).__name__}")
        try:
            return value.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise EncodingError(fname, f"not encodable as UTF-8: {exc.reason}") from None
    if isinstance(t, RecordOf):
        if not isinstance(value, t.schema.cls):
            raise EncodingError(fname, f"expected {t.schema.name}, got {type(value).__name__}")
        return _encode_payload(t.schema, value, fname + ".")
    if isinstance(t, ListOf) and isinstance(value, np.ndarray):
        return _encode_array(t.element, value, fname)
    if isinstance(t, ListOf):
        if not isinstance(value, (list, tuple)):
            raise EncodingError(fname, f"expected list, got {type(value).__name__}")
        el = t.element
        n = len(value)
        if isinstance(el, Primitive):
            # one struct call for the whole list; struct itself checks ranges
            if not set(map(type, value)) <= el.accepts:
                for i, v in enumerate(value):
                    _encode_primitive(el, v, f"{fname}[{i}]")
            flat: list[Any] = [el.size] * (2 * n)
            flat[1::2] = value
            try:
                return _list_struct(el.fmt, n).pack(n, *flat)
            except struct.error:
                for i, v in enumerate(value):
                    _encode_primitive(el, v, f"{fname}[{i}]")
                raise
        parts = [U32.pack(n)]
        for i, v in enumerate(value):
            raw = _encode_value(el, v, f"{fname}[{i}]")
            parts.append(U32.pack(len(raw)))
            parts.append(raw)
        return b"".join(parts)
    raise EncodingError(fname, f"unsupported type {t!r}")


def _encode_payload(schema: Schema, record: Any, prefix: str = "") -> bytes:
    if schema.flat is not None:
        values = [getattr(record, n) for n in schema.flat_names]
        if all(type(v) in ok for v, ok in zip(values, schema.flat_allowed)):
            args = schema.flat_template.copy()
            args[2::3] = values
            try:
                return schema.flat.pack(*args)
            except struct.error:
                pass  # let the generic path name the offending field
    parts = []
    for f in schema.fields:
        raw = _encode_value(f.type, getattr(record, f.name), prefix + f.name)
        parts.append(FIELD_HEADER.pack(f.key, len(raw)))
        parts.append(raw)
    return b"".join(parts)


def encode_payload(record: Any) -> bytes:
    return _encode_payload(schema_of(type(record)), record)


# -- decoding -----------------------------------------------------------------

def index_payload(buf: bytes | memoryview, start: int = 0, end: int | None = None) -> dict[int, tuple[int, int]]:
    """Map each field key of the payload in ``buf[start:end]`` to ``(offset, length)``."""
    end = len(buf) if end is None else end
    index: dict[int, tuple[int, int]] = {}
    pos = start
    while pos < end:
        if pos + FIELD_HEADER_SIZE > end:
            raise MalformedFrame(pos, "truncated field header")
        key, length = FIELD_HEADER.unpack_from(buf, pos)
        body = pos + FIELD_HEADER_SIZE
        if body + length > end:
            raise MalformedFrame(pos, f"field length {length} overruns payload")
        if key in index:
            raise MalformedFrame(pos, f"duplicate field key 0x{key:08x}")
        index[key] = (body, length)
        pos = body + length
    return index


def _decode_value(t: Any, buf: bytes, off: int, length: int) -> Any:
    if isinstance(t, Primitive):
        if length != t.size:
            raise MalformedFrame(off, f"{t.name} needs {t.size} bytes, got {length}")
        if t is BOOL:
            b = buf[off]
            if b > 1:
                raise MalformedFrame(off, f"bool byte {b}")
            return b == 1
        return t.codec.unpack_from(buf, off)[0]
    if t is STRING:
        try:
            return bytes(buf[off:off + length]).decode("utf-8")
        except UnicodeDecodeError:
            raise MalformedFrame(off, "invalid UTF-8 string") from None
    if isinstance(t, RecordOf):
        return _decode_payload(t.schema, buf, off, off + length)
    if isinstance(t, ListOf):
        if length < 4:
            raise MalformedFrame(off, "truncated list count")
        (n,) = U32.unpack_from(buf, off)
        el = t.element
        end = off + length
        if isinstance(el, Primitive):
            size = el.size
            if length != 4 + n * (4 + size):
                raise MalformedFrame(off, f"list of {n} {el.name} has wrong byte length {length}")
            flat = _list_struct("B" if el is BOOL else el.fmt, n).unpack_from(buf, off)
            if any(s != size for s in flat[1::2]):
                raise MalformedFrame(off, f"bad element length in list of {el.name}")
            items = list(flat[2::2])
            if el is BOOL:
                if any(b > 1 for b in items):
                    raise MalformedFrame(off, "bool byte out of range in list")
                return [b == 1 for b in items]
            return items
        out = []
        pos = off + 4
        for _ in range(n):
            if pos + 4 > end:
                raise MalformedFrame(pos, "truncated list element header")
            (elen,) = U32.unpack_from(buf, pos)
            if pos + 4 + elen > end:
                raise MalformedFrame(pos, f"list element length {elen} overruns field")
            out.append(_decode_value(el, buf, pos + 4, elen))
            pos += 4 + elen
        if pos != end:
            raise MalformedFrame(pos, "trailing bytes after list elements")
        return out
    raise SchemaError(f"unsupported type {t!r}")


def _decode_payload(schema: Schema, buf: bytes, start: int, end: int) -> Any:
    flat = schema.flat
    if flat is not None and end - start == flat.size:
        raw = flat.unpack_from(buf, start)
        if raw[0::3] == schema.flat_keys and raw[1::3] == schema.flat_sizes:
            values = list(raw[2::3])
            if all(values[i] <= 1 for i in schema.flat_bools):
                for i in schema.flat_bools:
                    values[i] = values[i] == 1
                return schema.cls(**dict(zip(schema.flat_names, values)))
    index = index_payload(buf, start, end)
    values = {}
    for f in schema.fields:
        loc = index.get(f.key)
        if loc is None:
            values[f.name] = f.default_value()
        else:
            values[f.name] = _decode_value(f.type, buf, *loc)
    return schema.cls(**values)


def decode_payload(payload: bytes, cls: type) -> Any:
    return _decode_payload(schema_of(cls), payload, 0, len(payload))


# -- containers ---------------------------------------------------------------

@dataclass(frozen=True)
class SerializedField:
    key: int
    length: int
    data: bytes


@dataclass(frozen=True)
class Container:
    """A typed, timestamped envelope around one serialized record."""

    data_type_id: int
    sent_timestamp: int
    payload: bytes = b""
    _decoded: dict = field(default_factory=dict, compare=False, repr=False)

    def to_bytes(self) -> bytes:
        return HEADER.pack(MAGIC, self.data_type_id, self.sent_timestamp, len(self.payload)) + self.payload

    @property
    def size(self) -> int:
        return HEADER_SIZE + len(self.payload)

    @classmethod
    def read_from(cls, buf: bytes, offset: int = 0) -> tuple["Container", int]:
        """Parse one frame starting at ``offset``; return it and the end offset."""
        if len(buf) - offset < HEADER_SIZE:
            raise MalformedFrame(offset, "truncated frame header")
        magic, type_id, ts, plen = HEADER.unpack_from(buf, offset)
        if magic != MAGIC:
            raise MalformedFrame(offset, f"bad magic 0x{magic:08x}")
        start = offset + HEADER_SIZE
        if start + plen > len(buf):
            raise MalformedFrame(start, f"payload length {plen} exceeds available {len(buf) - start} bytes")
        return cls(type_id, ts, bytes(buf[start:start + plen])), start + plen

    @classmethod
    def from_bytes(cls, frame: bytes) -> "Container":
        container, end = cls.read_from(frame)
        if end != len(frame):
            raise MalformedFrame(end, f"{len(frame) - end} trailing bytes after frame")
        return container

    def fields(self) -> list[SerializedField]:
        index = index_payload(self.payload)
        return [SerializedField(k, n, self.payload[o:o + n]) for k, (o, n) in index.items()]

    def unpack(self, cls: type) -> Any:
        """Decode the payload as ``cls``.

        Flat frozen records are decoded once per container and shared, which
        matters when one container fans out to many listeners.
        """
        hit = self._decoded.get(cls)
        if hit is not None:
            return hit
        try:
            record = decode_payload(self.payload, cls)
        except MalformedFrame as exc:
            raise MalformedFrame(exc.offset + HEADER_SIZE, str(exc).split(": ", 1)[1]) from None
        if schema_of(cls).shareable:
            self._decoded[cls] = record
        return record


def pack(record: Any, sent_timestamp: int = 0, data_type_id: int | None = None) -> Container:
    if data_type_id is None:
        data_type_id = schema_of(type(record)).type_id
        if data_type_id is None:
            raise SchemaError(f"{type(record).__name__} has no dataTypeId; pass one explicitly")
    return Container(data_type_id, sent_timestamp, encode_payload(record))


def encode(record: Any, sent_timestamp: int = 0, data_type_id: int | None = None) -> bytes:
    """Encode ``record`` as a complete Container frame."""
    return pack(record, sent_timestamp, data_type_id).to_bytes()


def decode(frame: bytes, cls: type) -> Any:
    """Decode the record carried by a complete Container frame."""
    return Container.from_bytes(frame).unpack(cls)


def iter_frames(buf: bytes) -> Iterator[Container]:
    pos = 0
    while pos < len(buf):
        container, pos = Container.read_from(buf, pos)
        yield container
