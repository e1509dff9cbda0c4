"""Random record types and values for serialization round-trip tests."""
from __future__ import annotations

import keyword
from dataclasses import make_dataclass
from typing import Any

import numpy as np

from simdrive.serialization import Int32, UInt32, UInt64, field_key

_SCALARS = ["bool", "int", "float", "str", "int32", "uint32", "uint64"]
_HINTS = {"bool": bool, "int": int, "float": float, "str": str, "int32": Int32, "uint32": UInt32, "uint64": UInt64}
_LETTERS = list("abcdefghijklmnopqrstuvwxyz_")


def _name(rng: np.random.Generator) -> str:
    while True:
        n = int(rng.integers(1, 12))
        s = "".join(rng.choice(_LETTERS, size=n))
        if s.isidentifier() and not keyword.iskeyword(s) and not s.startswith("__"):
            return s


def _text(rng: np.random.Generator) -> str:
    out = []
    for _ in range(int(rng.integers(0, 12))):
        kind = rng.integers(0, 3)
        if kind == 0:
            out.append(chr(int(rng.integers(32, 127))))
        elif kind == 1:
            out.append(chr(int(rng.integers(0xA0, 0xD800))))
        else:
            out.append(chr(int(rng.integers(0x10000, 0x10FFFF))))
    return "".join(out)


class RandomSchema:
    """A freshly made dataclass plus the recipe needed to fill it."""

    def __init__(self, rng: np.random.Generator, depth: int = 0, counter: list | None = None):
        self.counter = counter if counter is not None else [0]
        self.counter[0] += 1
        names: list[str] = []
        keys: set[int] = set()
        while len(names) < int(rng.integers(1, 8)):
            n = _name(rng)
            if n in names or field_key(n) in keys:
                continue
            names.append(n)
            keys.add(field_key(n))
        self.kinds: list[tuple[str, Any]] = []
        fields = []
        for n in names:
            kind, hint, sub = self._pick(rng, depth)
            self.kinds.append((kind, sub))
            fields.append((n, hint))
        self.names = names
        self.cls = make_dataclass(f"Rand{self.counter[0]}", fields, frozen=bool(rng.integers(0, 2)))

    def _pick(self, rng, depth):
        roll = rng.integers(0, 10)
        if roll < 6 or depth >= 2:
            k = str(rng.choice(_SCALARS))
            return k, _HINTS[k], None
        if roll < 9:
            k = str(rng.choice(_SCALARS))
            return "list", list[_HINTS[k]], k
        sub = RandomSchema(rng, depth + 1, self.counter)
        if rng.integers(0, 2):
            return "record", sub.cls, sub
        return "records", list[sub.cls], sub

    def value(self, rng: np.random.Generator):
        vals = {}
        for n, (kind, sub) in zip(self.names, self.kinds):
            if kind == "list":
                vals[n] = [scalar(rng, sub) for _ in range(int(rng.integers(0, 6)))]
            elif kind == "record":
                vals[n] = sub.value(rng)
            elif kind == "records":
                vals[n] = [sub.value(rng) for _ in range(int(rng.integers(0, 4)))]
            else:
                vals[n] = scalar(rng, kind)
        return self.cls(**vals)


def scalar(rng: np.random.Generator, kind: str):
    if kind == "bool":
        return bool(rng.integers(0, 2))
    if kind == "int":
        return int(rng.integers(-(2**63), 2**63 - 1, endpoint=True))
    if kind == "int32":
        return int(rng.integers(-(2**31), 2**31 - 1, endpoint=True))
    if kind == "uint32":
        return int(rng.integers(0, 2**32 - 1, endpoint=True))
    if kind == "uint64":
        return int(rng.integers(0, 2**64 - 1, endpoint=True, dtype=np.uint64))
    if kind == "float":
        # raw bit patterns give subnormals, infinities and huge exponents; NaN is skipped for ==
        while True:
            f = float(rng.integers(0, 2**64 - 1, endpoint=True, dtype=np.uint64).view(np.float64))
            if f == f:
                return f
    return _text(rng)
