import struct

from .errors import Truncated

_U2 = struct.Struct(">H")
_S2 = struct.Struct(">h")
_U4 = struct.Struct(">I")
_S4 = struct.Struct(">i")


class ByteReader:
    """Big-endian cursor over a byte string; running off the end raises Truncated."""

    __slots__ = ("data", "pos", "end")

    def __init__(self, data: bytes, pos: int = 0, end: int | None = None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def _need(self, n: int) -> int:
        p = self.pos
        if p + n > self.end:
            raise Truncated(f"need {n} byte(s) at offset {p}, only {self.end - p} left")
        self.pos = p + n
        return p

    def u1(self) -> int:
        return self.data[self._need(1)]

    def s1(self) -> int:
        v = self.data[self._need(1)]
        return v - 256 if v > 127 else v

    def u2(self) -> int:
        return _U2.unpack_from(self.data, self._need(2))[0]

    def s2(self) -> int:
        return _S2.unpack_from(self.data, self._need(2))[0]

    def u4(self) -> int:
        return _U4.unpack_from(self.data, self._need(4))[0]

    def s4(self) -> int:
        return _S4.unpack_from(self.data, self._need(4))[0]

    def read(self, n: int) -> bytes:
        p = self._need(n)
        return bytes(self.data[p:p + n])

    def remaining(self) -> int:
        return self.end - self.pos


def u2(v: int) -> bytes:
    return _U2.pack(v)


def s2(v: int) -> bytes:
    return _S2.pack(v)


def u4(v: int) -> bytes:
    return _U4.pack(v)


def s4(v: int) -> bytes:
    return _S4.pack(v)
