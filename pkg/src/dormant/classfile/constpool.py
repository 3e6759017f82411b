"""Constant pool model.

Entries are kept in their raw numeric form (float and double bit patterns,
Utf8 bytes as stored) so that emitting a parsed pool reproduces the input.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .errors import MalformedPool, OverflowPool
from .reader import ByteReader, u2, u4


class ConstantKind(enum.IntEnum):
    UTF8 = 1
    INTEGER = 3
    FLOAT = 4
    LONG = 5
    DOUBLE = 6
    CLASS = 7
    STRING = 8
    FIELDREF = 9
    METHODREF = 10
    INTERFACE_METHODREF = 11
    NAME_AND_TYPE = 12
    METHOD_HANDLE = 15
    METHOD_TYPE = 16
    DYNAMIC = 17
    INVOKE_DYNAMIC = 18
    MODULE = 19
    PACKAGE = 20

    @property
    def wide(self) -> bool:
        return self in (ConstantKind.LONG, ConstantKind.DOUBLE)


K = ConstantKind
MEMBER_REFS = (K.FIELDREF, K.METHODREF, K.INTERFACE_METHODREF)
METHOD_REFS = (K.METHODREF, K.INTERFACE_METHODREF)


@dataclass(frozen=True)
class ConstantEntry:
    kind: ConstantKind
    payload: tuple


def decode_mutf8(raw: bytes) -> str:
    """Decode JVM modified UTF-8 (NUL as C0 80, supplementary chars as surrogate pairs)."""
    text = raw.replace(b"\xc0\x80", b"\x00").decode("utf-8", "surrogatepass")
    if any("\ud800" <= c <= "\udbff" for c in text):
        # re-pair surrogates so supplementary characters come back as one code point
        text = text.encode("utf-16", "surrogatepass").decode("utf-16", "surrogatepass")
    return text


def encode_mutf8(text: str) -> bytes:
    out = bytearray()
    for ch in text:
        cp = ord(ch)
        if cp == 0:
            out += b"\xc0\x80"
        elif cp > 0xFFFF:
            v = cp - 0x10000
            for unit in (0xD800 + (v >> 10), 0xDC00 + (v & 0x3FF)):
                out += chr(unit).encode("utf-8", "surrogatepass")
        else:
            out += ch.encode("utf-8", "surrogatepass")
    return bytes(out)


class ConstantPool:
    """Immutable, 1-indexed constant pool. Slot 0 and the slot after a
    Long/Double hold ``None``."""

    __slots__ = ("_entries", "_utf8_cache")

    def __init__(self, entries=(None,)):
        entries = tuple(entries)
        if not entries or entries[0] is not None:
            entries = (None,) + entries
        self._entries = entries
        self._utf8_cache: dict[int, str] = {}

    # -- access ------------------------------------------------------------
    @property
    def count(self) -> int:
        """The constant_pool_count field: number of slots including slot 0."""
        return len(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        for i, e in enumerate(self._entries):
            if e is not None:
                yield i, e

    def __eq__(self, other):
        return isinstance(other, ConstantPool) and self._entries == other._entries

    def __hash__(self):
        return hash(self._entries)

    def __repr__(self):
        return f"ConstantPool({self.count - 1} slots)"

    @property
    def entries(self) -> tuple:
        return self._entries

    def entry(self, index: int, *kinds: ConstantKind) -> ConstantEntry:
        if not 0 < index < len(self._entries) or self._entries[index] is None:
            raise MalformedPool(f"constant pool index {index} does not name an entry")
        e = self._entries[index]
        if kinds and e.kind not in kinds:
            want = "/".join(k.name for k in kinds)
            raise MalformedPool(f"constant #{index} is {e.kind.name}, expected {want}")
        return e

    def kind(self, index: int) -> ConstantKind:
        return self.entry(index).kind

    def utf8(self, index: int) -> str:
        s = self._utf8_cache.get(index)
        if s is None:
            s = decode_mutf8(self.entry(index, K.UTF8).payload[0])
            self._utf8_cache[index] = s
        return s

    def class_name(self, index: int) -> str:
        return self.utf8(self.entry(index, K.CLASS).payload[0])

    def string(self, index: int) -> str:
        return self.utf8(self.entry(index, K.STRING).payload[0])

    def name_and_type(self, index: int) -> tuple[str, str]:
        n, d = self.entry(index, K.NAME_AND_TYPE).payload
        return self.utf8(n), self.utf8(d)

    def member_ref(self, index: int) -> tuple[str, str, str]:
        """(owner internal name, member name, descriptor) of a Field/Method/InterfaceMethod ref."""
        c, nt = self.entry(index, *MEMBER_REFS).payload
        name, desc = self.name_and_type(nt)
        return self.class_name(c), name, desc

    def dynamic_name_and_type(self, index: int) -> tuple[str, str]:
        _, nt = self.entry(index, K.DYNAMIC, K.INVOKE_DYNAMIC).payload
        return self.name_and_type(nt)

    def loadable_value(self, index: int):
        """(kind, python value) for an LDC operand; references are resolved to names."""
        e = self.entry(index)
        if e.kind is K.STRING:
            return e.kind, self.utf8(e.payload[0])
        if e.kind is K.CLASS:
            return e.kind, self.utf8(e.payload[0])
        return e.kind, e.payload

    # -- lookup for deduplicated additions ---------------------------------
    def find(self, kind: ConstantKind, payload: tuple) -> int | None:
        target = ConstantEntry(kind, payload)
        for i, e in enumerate(self._entries):
            if e == target:
                return i
        return None

    # -- validation ----------------------------------------------------------
    def validate(self) -> None:
        """Check that every inter-entry reference resolves to the expected kind."""
        for i, e in self:
            k = e.kind
            p = e.payload
            if k in (K.CLASS, K.STRING, K.METHOD_TYPE, K.MODULE, K.PACKAGE):
                self.entry(p[0], K.UTF8)
            elif k in MEMBER_REFS:
                self.entry(p[0], K.CLASS)
                self.entry(p[1], K.NAME_AND_TYPE)
            elif k is K.NAME_AND_TYPE:
                self.entry(p[0], K.UTF8)
                self.entry(p[1], K.UTF8)
            elif k is K.METHOD_HANDLE:
                if not 1 <= p[0] <= 9:
                    raise MalformedPool(f"constant #{i}: bad method handle kind {p[0]}")
                self.entry(p[1], *MEMBER_REFS)
            elif k in (K.DYNAMIC, K.INVOKE_DYNAMIC):
                self.entry(p[1], K.NAME_AND_TYPE)

    # -- (de)serialisation ---------------------------------------------------
    @classmethod
    def read(cls, r: ByteReader) -> "ConstantPool":
        count = r.u2()
        entries: list = [None] * max(count, 1)
        i = 1
        while i < count:
            tag = r.u1()
            try:
                kind = ConstantKind(tag)
            except ValueError:
                raise MalformedPool(f"unknown constant tag {tag} at index {i}") from None
            if kind is K.UTF8:
                n = r.u2()
                payload = (r.read(n),)
            elif kind in (K.INTEGER, K.FLOAT):
                payload = (r.u4(),)
            elif kind.wide:
                hi = r.u4()
                payload = ((hi << 32) | r.u4(),)
            elif kind in (K.CLASS, K.STRING, K.METHOD_TYPE, K.MODULE, K.PACKAGE):
                payload = (r.u2(),)
            elif kind is K.METHOD_HANDLE:
                payload = (r.u1(), r.u2())
            else:
                payload = (r.u2(), r.u2())
            entries[i] = ConstantEntry(kind, payload)
            if kind.wide:
                if i + 1 >= count:
                    raise MalformedPool(f"wide constant at index {i} overruns the pool")
                i += 2
            else:
                i += 1
        return cls(entries)

    def write(self) -> bytes:
        if self.count > 0xFFFF:
            raise OverflowPool(f"constant pool needs {self.count} slots (limit 65535)")
        out = bytearray(u2(self.count))
        for _, e in self:
            k = e.kind
            out.append(k)
            p = e.payload
            if k is K.UTF8:
                if len(p[0]) > 0xFFFF:
                    raise OverflowPool("Utf8 constant longer than 65535 bytes")
                out += u2(len(p[0])) + p[0]
            elif k in (K.INTEGER, K.FLOAT):
                out += u4(p[0])
            elif k.wide:
                out += u4(p[0] >> 32) + u4(p[0] & 0xFFFFFFFF)
            elif k is K.METHOD_HANDLE:
                out.append(p[0])
                out += u2(p[1])
            else:
                for v in p:
                    out += u2(v)
        return bytes(out)


class PoolBuilder:
    """Mutable helper that appends (deduplicated) constants to a copy of a pool."""

    def __init__(self, pool: ConstantPool | None = None):
        self._entries = list(pool.entries if pool is not None else (None,))
        self._index = {e: i for i, e in enumerate(self._entries) if e is not None}

    def _add(self, kind: ConstantKind, payload: tuple) -> int:
        e = ConstantEntry(kind, payload)
        i = self._index.get(e)
        if i is not None:
            return i
        i = len(self._entries)
        self._entries.append(e)
        if kind.wide:
            self._entries.append(None)
        self._index[e] = i
        return i

    def utf8(self, text: str) -> int:
        return self._add(K.UTF8, (encode_mutf8(text),))

    def class_ref(self, name: str) -> int:
        return self._add(K.CLASS, (self.utf8(name),))

    def string(self, text: str) -> int:
        return self._add(K.STRING, (self.utf8(text),))

    def integer(self, value: int) -> int:
        return self._add(K.INTEGER, (value & 0xFFFFFFFF,))

    def name_and_type(self, name: str, desc: str) -> int:
        return self._add(K.NAME_AND_TYPE, (self.utf8(name), self.utf8(desc)))

    def field_ref(self, owner: str, name: str, desc: str) -> int:
        return self._add(K.FIELDREF, (self.class_ref(owner), self.name_and_type(name, desc)))

    def method_ref(self, owner: str, name: str, desc: str, interface: bool = False) -> int:
        kind = K.INTERFACE_METHODREF if interface else K.METHODREF
        return self._add(kind, (self.class_ref(owner), self.name_and_type(name, desc)))

    def build(self) -> ConstantPool:
        return ConstantPool(self._entries)
