"""Opaque attributes and the structurally decoded StackMapTable."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import MalformedAttribute, OffsetOverflow, Truncated
from .reader import ByteReader, u2

# verification_type_info tags
ITEM_TOP, ITEM_INTEGER, ITEM_FLOAT, ITEM_DOUBLE, ITEM_LONG, ITEM_NULL = range(6)
ITEM_UNINITIALIZED_THIS, ITEM_OBJECT, ITEM_UNINITIALIZED = 6, 7, 8

SAME_EXTENDED = 251
SAME_LOCALS_1_EXTENDED = 247
FULL_FRAME = 255


@dataclass(frozen=True)
class AttributeBlob:
    name_index: int
    data: bytes
    name: str = ""

    def encode(self) -> bytes:
        return u2(self.name_index) + len(self.data).to_bytes(4, "big") + self.data


@dataclass(frozen=True)
class VType:
    tag: int
    value: int | None = None  # pool index (Object) or code offset (Uninitialized)


@dataclass(frozen=True)
class Frame:
    frame_type: int
    offset: int                       # absolute bytecode offset
    locals: tuple[VType, ...] = ()    # full locals (full_frame) or appended ones
    stack: tuple[VType, ...] = ()


@dataclass(frozen=True)
class StackMapTable:
    name_index: int
    frames: tuple[Frame, ...]
    name: str = "StackMapTable"

    @classmethod
    def parse(cls, name_index: int, data: bytes) -> "StackMapTable":
        r = ByteReader(data)
        try:
            n = r.u2()
            frames = []
            prev = -1
            for _ in range(n):
                ft = r.u1()
                locals_: tuple = ()
                stack: tuple = ()
                if ft <= 63:
                    delta = ft
                elif ft <= 127:
                    delta = ft - 64
                    stack = (_read_vtype(r),)
                elif ft < 247:
                    raise MalformedAttribute(f"reserved stack map frame type {ft}")
                elif ft == SAME_LOCALS_1_EXTENDED:
                    delta = r.u2()
                    stack = (_read_vtype(r),)
                elif ft <= SAME_EXTENDED:
                    delta = r.u2()
                elif ft < FULL_FRAME:
                    delta = r.u2()
                    locals_ = tuple(_read_vtype(r) for _ in range(ft - SAME_EXTENDED))
                else:
                    delta = r.u2()
                    locals_ = tuple(_read_vtype(r) for _ in range(r.u2()))
                    stack = tuple(_read_vtype(r) for _ in range(r.u2()))
                offset = delta if prev < 0 else prev + delta + 1
                frames.append(Frame(ft, offset, locals_, stack))
                prev = offset
        except Truncated as exc:
            raise MalformedAttribute(f"truncated StackMapTable: {exc}") from None
        if r.remaining():
            raise MalformedAttribute("trailing bytes after StackMapTable")
        return cls(name_index, tuple(frames))

    def encode_data(self) -> bytes:
        out = bytearray(u2(len(self.frames)))
        prev = -1
        for f in self.frames:
            delta = f.offset if prev < 0 else f.offset - prev - 1
            if delta < 0:
                raise MalformedAttribute(f"stack map frames out of order at offset {f.offset}")
            ft = f.frame_type
            if ft <= 63:
                out.append(delta)
            elif ft <= 127:
                out.append(64 + delta)
                out += _write_vtype(f.stack[0])
            else:
                out.append(ft)
                out += u2(delta)
                if ft == SAME_LOCALS_1_EXTENDED:
                    out += _write_vtype(f.stack[0])
                elif SAME_EXTENDED < ft < FULL_FRAME:
                    out += b"".join(_write_vtype(v) for v in f.locals)
                elif ft == FULL_FRAME:
                    out += u2(len(f.locals)) + b"".join(_write_vtype(v) for v in f.locals)
                    out += u2(len(f.stack)) + b"".join(_write_vtype(v) for v in f.stack)
            prev = f.offset
        return bytes(out)

    def encode(self) -> bytes:
        data = self.encode_data()
        return u2(self.name_index) + len(data).to_bytes(4, "big") + data

    def relocate(self, remap) -> "StackMapTable":
        """Move frames (and Uninitialized offsets) through ``remap``; widen
        compact frame types whose delta no longer fits."""
        frames = []
        prev = -1
        for f in self.frames:
            off = remap(f.offset)
            delta = off if prev < 0 else off - prev - 1
            ft = f.frame_type
            if ft <= 63 and delta > 63:
                ft = SAME_EXTENDED
            elif 64 <= ft <= 127 and delta > 63:
                ft = SAME_LOCALS_1_EXTENDED
            if delta > 0xFFFF:
                raise OffsetOverflow(f"stack map frame delta {delta} exceeds 16 bits")
            frames.append(Frame(ft, off, _remap_types(f.locals, remap), _remap_types(f.stack, remap)))
            prev = off
        return StackMapTable(self.name_index, tuple(frames), self.name)


def _remap_types(types, remap):
    return tuple(VType(t.tag, remap(t.value)) if t.tag == ITEM_UNINITIALIZED else t for t in types)


def _read_vtype(r: ByteReader) -> VType:
    tag = r.u1()
    if tag in (ITEM_OBJECT, ITEM_UNINITIALIZED):
        return VType(tag, r.u2())
    if tag > ITEM_UNINITIALIZED:
        raise MalformedAttribute(f"bad verification type tag {tag}")
    return VType(tag)


def _write_vtype(v: VType) -> bytes:
    if v.tag in (ITEM_OBJECT, ITEM_UNINITIALIZED):
        return bytes((v.tag,)) + u2(v.value)
    return bytes((v.tag,))
