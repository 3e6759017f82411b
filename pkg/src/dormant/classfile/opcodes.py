"""JVM opcode table and instruction encoding.

Every opcode is described by its mnemonic, operand format and fixed stack
effect in slots (``None`` where the effect depends on a descriptor or
constant).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace

from .errors import ClassFormatError, OffsetOverflow
from .reader import ByteReader, s2, s4, u2


class Fmt(enum.Enum):
    NONE = 0
    BYTE = 1          # bipush
    SHORT = 2         # sipush
    LOCAL = 3         # u1 local index (u2 under wide)
    CP1 = 4           # ldc
    CP2 = 5
    IINC = 6
    BRANCH2 = 7
    BRANCH4 = 8
    TABLESWITCH = 9
    LOOKUPSWITCH = 10
    INVOKEINTERFACE = 11
    INVOKEDYNAMIC = 12
    NEWARRAY = 13
    MULTIANEWARRAY = 14
    WIDE = 15


@dataclass(frozen=True)
class OpInfo:
    code: int
    name: str
    fmt: Fmt
    pop: int | None
    push: int | None


OPS: dict[int, OpInfo] = {}
BY_NAME: dict[str, int] = {}


def _op(code, name, fmt=Fmt.NONE, pop=0, push=0):
    info = OpInfo(code, name, fmt, pop, push)
    OPS[code] = info
    BY_NAME[name] = code


_op(0x00, "nop")
_op(0x01, "aconst_null", push=1)
for _i, _n in enumerate(("iconst_m1", "iconst_0", "iconst_1", "iconst_2", "iconst_3", "iconst_4", "iconst_5")):
    _op(0x02 + _i, _n, push=1)
_op(0x09, "lconst_0", push=2)
_op(0x0A, "lconst_1", push=2)
_op(0x0B, "fconst_0", push=1)
_op(0x0C, "fconst_1", push=1)
_op(0x0D, "fconst_2", push=1)
_op(0x0E, "dconst_0", push=2)
_op(0x0F, "dconst_1", push=2)
_op(0x10, "bipush", Fmt.BYTE, push=1)
_op(0x11, "sipush", Fmt.SHORT, push=1)
_op(0x12, "ldc", Fmt.CP1, push=1)
_op(0x13, "ldc_w", Fmt.CP2, push=1)
_op(0x14, "ldc2_w", Fmt.CP2, push=2)

_TYPES = (("i", 1), ("l", 2), ("f", 1), ("d", 2), ("a", 1))
for _i, (_t, _w) in enumerate(_TYPES):
    _op(0x15 + _i, _t + "load", Fmt.LOCAL, push=_w)
    _op(0x36 + _i, _t + "store", Fmt.LOCAL, pop=_w)
    for _k in range(4):
        _op(0x1A + 4 * _i + _k, f"{_t}load_{_k}", push=_w)
        _op(0x3B + 4 * _i + _k, f"{_t}store_{_k}", pop=_w)

for _i, (_n, _w) in enumerate((("iaload", 1), ("laload", 2), ("faload", 1), ("daload", 2),
                               ("aaload", 1), ("baload", 1), ("caload", 1), ("saload", 1))):
    _op(0x2E + _i, _n, pop=2, push=_w)
for _i, (_n, _w) in enumerate((("iastore", 1), ("lastore", 2), ("fastore", 1), ("dastore", 2),
                               ("aastore", 1), ("bastore", 1), ("castore", 1), ("sastore", 1))):
    _op(0x4F + _i, _n, pop=2 + _w)

_op(0x57, "pop", pop=1)
_op(0x58, "pop2", pop=2)
_op(0x59, "dup", pop=1, push=2)
_op(0x5A, "dup_x1", pop=2, push=3)
_op(0x5B, "dup_x2", pop=3, push=4)
_op(0x5C, "dup2", pop=2, push=4)
_op(0x5D, "dup2_x1", pop=3, push=5)
_op(0x5E, "dup2_x2", pop=4, push=6)
_op(0x5F, "swap", pop=2, push=2)

for _i, _name in enumerate(("add", "sub", "mul", "div", "rem")):
    _op(0x60 + 4 * _i, "i" + _name, pop=2, push=1)
    _op(0x61 + 4 * _i, "l" + _name, pop=4, push=2)
    _op(0x62 + 4 * _i, "f" + _name, pop=2, push=1)
    _op(0x63 + 4 * _i, "d" + _name, pop=4, push=2)
_op(0x74, "ineg", pop=1, push=1)
_op(0x75, "lneg", pop=2, push=2)
_op(0x76, "fneg", pop=1, push=1)
_op(0x77, "dneg", pop=2, push=2)
_op(0x78, "ishl", pop=2, push=1)
_op(0x79, "lshl", pop=3, push=2)
_op(0x7A, "ishr", pop=2, push=1)
_op(0x7B, "lshr", pop=3, push=2)
_op(0x7C, "iushr", pop=2, push=1)
_op(0x7D, "lushr", pop=3, push=2)
_op(0x7E, "iand", pop=2, push=1)
_op(0x7F, "land", pop=4, push=2)
_op(0x80, "ior", pop=2, push=1)
_op(0x81, "lor", pop=4, push=2)
_op(0x82, "ixor", pop=2, push=1)
_op(0x83, "lxor", pop=4, push=2)
_op(0x84, "iinc", Fmt.IINC)
for _i, (_n, _p, _q) in enumerate((
        ("i2l", 1, 2), ("i2f", 1, 1), ("i2d", 1, 2), ("l2i", 2, 1), ("l2f", 2, 1), ("l2d", 2, 2),
        ("f2i", 1, 1), ("f2l", 1, 2), ("f2d", 1, 2), ("d2i", 2, 1), ("d2l", 2, 2), ("d2f", 2, 1),
        ("i2b", 1, 1), ("i2c", 1, 1), ("i2s", 1, 1))):
    _op(0x85 + _i, _n, pop=_p, push=_q)
_op(0x94, "lcmp", pop=4, push=1)
_op(0x95, "fcmpl", pop=2, push=1)
_op(0x96, "fcmpg", pop=2, push=1)
_op(0x97, "dcmpl", pop=4, push=1)
_op(0x98, "dcmpg", pop=4, push=1)
for _i, _n in enumerate(("ifeq", "ifne", "iflt", "ifge", "ifgt", "ifle")):
    _op(0x99 + _i, _n, Fmt.BRANCH2, pop=1)
for _i, _n in enumerate(("if_icmpeq", "if_icmpne", "if_icmplt", "if_icmpge", "if_icmpgt",
                         "if_icmple", "if_acmpeq", "if_acmpne")):
    _op(0x9F + _i, _n, Fmt.BRANCH2, pop=2)
_op(0xA7, "goto", Fmt.BRANCH2)
_op(0xA8, "jsr", Fmt.BRANCH2, push=1)
_op(0xA9, "ret", Fmt.LOCAL)
_op(0xAA, "tableswitch", Fmt.TABLESWITCH, pop=1)
_op(0xAB, "lookupswitch", Fmt.LOOKUPSWITCH, pop=1)
_op(0xAC, "ireturn", pop=1)
_op(0xAD, "lreturn", pop=2)
_op(0xAE, "freturn", pop=1)
_op(0xAF, "dreturn", pop=2)
_op(0xB0, "areturn", pop=1)
_op(0xB1, "return")
_op(0xB2, "getstatic", Fmt.CP2, pop=None, push=None)
_op(0xB3, "putstatic", Fmt.CP2, pop=None, push=None)
_op(0xB4, "getfield", Fmt.CP2, pop=None, push=None)
_op(0xB5, "putfield", Fmt.CP2, pop=None, push=None)
_op(0xB6, "invokevirtual", Fmt.CP2, pop=None, push=None)
_op(0xB7, "invokespecial", Fmt.CP2, pop=None, push=None)
_op(0xB8, "invokestatic", Fmt.CP2, pop=None, push=None)
_op(0xB9, "invokeinterface", Fmt.INVOKEINTERFACE, pop=None, push=None)
_op(0xBA, "invokedynamic", Fmt.INVOKEDYNAMIC, pop=None, push=None)
_op(0xBB, "new", Fmt.CP2, push=1)
_op(0xBC, "newarray", Fmt.NEWARRAY, pop=1, push=1)
_op(0xBD, "anewarray", Fmt.CP2, pop=1, push=1)
_op(0xBE, "arraylength", pop=1, push=1)
_op(0xBF, "athrow", pop=1)
_op(0xC0, "checkcast", Fmt.CP2, pop=1, push=1)
_op(0xC1, "instanceof", Fmt.CP2, pop=1, push=1)
_op(0xC2, "monitorenter", pop=1)
_op(0xC3, "monitorexit", pop=1)
_op(0xC4, "wide", Fmt.WIDE)
_op(0xC5, "multianewarray", Fmt.MULTIANEWARRAY, pop=None, push=1)
_op(0xC6, "ifnull", Fmt.BRANCH2, pop=1)
_op(0xC7, "ifnonnull", Fmt.BRANCH2, pop=1)
_op(0xC8, "goto_w", Fmt.BRANCH4)
_op(0xC9, "jsr_w", Fmt.BRANCH4, push=1)
_op(0xCA, "breakpoint")
_op(0xFE, "impdep1")
_op(0xFF, "impdep2")

LDC = BY_NAME["ldc"]
LDC_W = BY_NAME["ldc_w"]
LDC2_W = BY_NAME["ldc2_w"]
ALOAD_0 = BY_NAME["aload_0"]
GETFIELD = BY_NAME["getfield"]
PUTFIELD = BY_NAME["putfield"]
GETSTATIC = BY_NAME["getstatic"]
PUTSTATIC = BY_NAME["putstatic"]
INVOKEVIRTUAL = BY_NAME["invokevirtual"]
INVOKESPECIAL = BY_NAME["invokespecial"]
INVOKESTATIC = BY_NAME["invokestatic"]
INVOKEINTERFACE = BY_NAME["invokeinterface"]
INVOKEDYNAMIC = BY_NAME["invokedynamic"]
INVOKES = frozenset((INVOKEVIRTUAL, INVOKESPECIAL, INVOKESTATIC, INVOKEINTERFACE, INVOKEDYNAMIC))
FIELD_OPS = frozenset((GETSTATIC, PUTSTATIC, GETFIELD, PUTFIELD))
RETURNS = frozenset(BY_NAME[n] for n in ("ireturn", "lreturn", "freturn", "dreturn", "areturn", "return"))
UNCONDITIONAL = frozenset(BY_NAME[n] for n in ("goto", "goto_w", "athrow", "ret",
                                               "tableswitch", "lookupswitch")) | RETURNS
WIDENABLE = frozenset(BY_NAME[n] for n in ("iload", "lload", "fload", "dload", "aload", "istore",
                                           "lstore", "fstore", "dstore", "astore", "ret", "iinc"))
BRANCH_FORMATS = (Fmt.BRANCH2, Fmt.BRANCH4, Fmt.TABLESWITCH, Fmt.LOOKUPSWITCH)


@dataclass(frozen=True)
class Instruction:
    """One decoded instruction.

    Branch operands hold *absolute* target offsets; they are turned back
    into relative deltas on encoding.  Operand layout by format:

    ====================  =============================================
    BYTE/SHORT            (value,)
    LOCAL                 (index,)
    CP1/CP2               (cp_index,)
    IINC                  (index, increment)
    BRANCH2/BRANCH4       (target,)
    TABLESWITCH           (default, low, high, targets, padding)
    LOOKUPSWITCH          (default, ((match, target), ...), padding)
    INVOKEINTERFACE       (cp_index, count, trailing_byte)
    INVOKEDYNAMIC         (cp_index, trailing_u2)
    NEWARRAY              (atype,)
    MULTIANEWARRAY        (cp_index, dimensions)
    ====================  =============================================
    """

    opcode: int
    operands: tuple = ()
    offset: int = 0
    wide: bool = False

    @property
    def info(self) -> OpInfo:
        return OPS[self.opcode]

    @property
    def name(self) -> str:
        return OPS[self.opcode].name

    @property
    def cp_index(self) -> int | None:
        fmt = OPS[self.opcode].fmt
        if fmt in (Fmt.CP1, Fmt.CP2, Fmt.INVOKEINTERFACE, Fmt.INVOKEDYNAMIC, Fmt.MULTIANEWARRAY):
            return self.operands[0]
        return None

    def targets(self) -> tuple[int, ...]:
        fmt = OPS[self.opcode].fmt
        if fmt in (Fmt.BRANCH2, Fmt.BRANCH4):
            return (self.operands[0],)
        if fmt is Fmt.TABLESWITCH:
            return (self.operands[0],) + tuple(self.operands[3])
        if fmt is Fmt.LOOKUPSWITCH:
            return (self.operands[0],) + tuple(t for _, t in self.operands[1])
        return ()

    def retarget(self, remap) -> "Instruction":
        """Copy with every branch target passed through ``remap``."""
        fmt = OPS[self.opcode].fmt
        ops = self.operands
        if fmt in (Fmt.BRANCH2, Fmt.BRANCH4):
            ops = (remap(ops[0]),)
        elif fmt is Fmt.TABLESWITCH:
            ops = (remap(ops[0]), ops[1], ops[2], tuple(remap(t) for t in ops[3]), ops[4])
        elif fmt is Fmt.LOOKUPSWITCH:
            ops = (remap(ops[0]), tuple((m, remap(t)) for m, t in ops[1]), ops[2])
        else:
            return self
        return replace(self, operands=ops)

    def length(self, offset: int | None = None) -> int:
        at = self.offset if offset is None else offset
        fmt = OPS[self.opcode].fmt
        if self.wide:
            return 6 if fmt is Fmt.IINC else 4
        if fmt is Fmt.TABLESWITCH:
            pad = 3 - (at % 4)
            return 1 + pad + 12 + 4 * len(self.operands[3])
        if fmt is Fmt.LOOKUPSWITCH:
            pad = 3 - (at % 4)
            return 1 + pad + 8 + 8 * len(self.operands[1])
        return _FIXED_LEN[fmt]

    def encode(self) -> bytes:
        op = self.opcode
        fmt = OPS[op].fmt
        o = self.operands
        at = self.offset
        if self.wide:
            body = bytes((0xC4, op)) + u2(o[0])
            return body + s2(o[1]) if fmt is Fmt.IINC else body
        head = bytes((op,))
        if fmt is Fmt.NONE:
            return head
        if fmt is Fmt.BYTE:
            return head + (o[0] & 0xFF).to_bytes(1, "big")
        if fmt is Fmt.SHORT:
            return head + s2(o[0])
        if fmt in (Fmt.LOCAL, Fmt.CP1, Fmt.NEWARRAY):
            return head + bytes((o[0],))
        if fmt is Fmt.CP2:
            return head + u2(o[0])
        if fmt is Fmt.IINC:
            return head + bytes((o[0], o[1] & 0xFF))
        if fmt is Fmt.BRANCH2:
            delta = o[0] - at
            if not -0x8000 <= delta <= 0x7FFF:
                raise OffsetOverflow(f"{self.name} at {at}: branch delta {delta} exceeds 16 bits")
            return head + s2(delta)
        if fmt is Fmt.BRANCH4:
            return head + s4(o[0] - at)
        if fmt is Fmt.INVOKEINTERFACE:
            return head + u2(o[0]) + bytes((o[1], o[2]))
        if fmt is Fmt.INVOKEDYNAMIC:
            return head + u2(o[0]) + u2(o[1])
        if fmt is Fmt.MULTIANEWARRAY:
            return head + u2(o[0]) + bytes((o[1],))
        if fmt is Fmt.TABLESWITCH:
            default, low, high, targets, padding = o
            out = head + _padding(padding, at) + s4(default - at) + s4(low) + s4(high)
            return out + b"".join(s4(t - at) for t in targets)
        if fmt is Fmt.LOOKUPSWITCH:
            default, pairs, padding = o
            out = head + _padding(padding, at) + s4(default - at) + s4(len(pairs))
            return out + b"".join(s4(m) + s4(t - at) for m, t in pairs)
        raise ClassFormatError(f"cannot encode opcode {op:#x}")


_FIXED_LEN = {
    Fmt.NONE: 1, Fmt.BYTE: 2, Fmt.SHORT: 3, Fmt.LOCAL: 2, Fmt.CP1: 2, Fmt.CP2: 3,
    Fmt.IINC: 3, Fmt.BRANCH2: 3, Fmt.BRANCH4: 5, Fmt.INVOKEINTERFACE: 5,
    Fmt.INVOKEDYNAMIC: 5, Fmt.NEWARRAY: 2, Fmt.MULTIANEWARRAY: 4,
}


def _padding(stored: bytes, at: int) -> bytes:
    n = 3 - (at % 4)
    # keep the original padding bytes when the alignment did not change
    return stored if len(stored) == n else bytes(n)


def make(name: str, *operands, wide: bool = False) -> Instruction:
    """Build an instruction from its mnemonic."""
    return Instruction(BY_NAME[name], tuple(operands), wide=wide)


def decode(code: bytes) -> list[Instruction]:
    """Linear-sweep decode of a Code attribute's byte array."""
    r = ByteReader(code)
    out = []
    while r.remaining():
        at = r.pos
        op = r.u1()
        info = OPS.get(op)
        if info is None:
            raise ClassFormatError(f"unknown opcode {op:#x} at offset {at}")
        fmt = info.fmt
        wide = False
        if fmt is Fmt.WIDE:
            op = r.u1()
            if op not in WIDENABLE:
                raise ClassFormatError(f"wide applied to {OPS.get(op, info).name} at offset {at}")
            wide = True
            ops = (r.u2(), r.s2()) if OPS[op].fmt is Fmt.IINC else (r.u2(),)
        elif fmt is Fmt.NONE:
            ops = ()
        elif fmt is Fmt.BYTE:
            ops = (r.s1(),)
        elif fmt is Fmt.SHORT:
            ops = (r.s2(),)
        elif fmt in (Fmt.LOCAL, Fmt.CP1, Fmt.NEWARRAY):
            ops = (r.u1(),)
        elif fmt is Fmt.CP2:
            ops = (r.u2(),)
        elif fmt is Fmt.IINC:
            ops = (r.u1(), r.s1())
        elif fmt is Fmt.BRANCH2:
            ops = (at + r.s2(),)
        elif fmt is Fmt.BRANCH4:
            ops = (at + r.s4(),)
        elif fmt is Fmt.INVOKEINTERFACE:
            ops = (r.u2(), r.u1(), r.u1())
        elif fmt is Fmt.INVOKEDYNAMIC:
            ops = (r.u2(), r.u2())
        elif fmt is Fmt.MULTIANEWARRAY:
            ops = (r.u2(), r.u1())
        elif fmt is Fmt.TABLESWITCH:
            padding = r.read(3 - (at % 4))
            default = at + r.s4()
            low, high = r.s4(), r.s4()
            if high < low:
                raise ClassFormatError(f"tableswitch at {at}: high < low")
            targets = tuple(at + r.s4() for _ in range(high - low + 1))
            ops = (default, low, high, targets, padding)
        else:  # LOOKUPSWITCH
            padding = r.read(3 - (at % 4))
            default = at + r.s4()
            n = r.s4()
            if n < 0:
                raise ClassFormatError(f"lookupswitch at {at}: negative pair count")
            pairs = tuple((r.s4(), at + r.s4()) for _ in range(n))
            ops = (default, pairs, padding)
        out.append(Instruction(op, ops, at, wide))
    return out


def layout(instructions) -> list[Instruction]:
    """Assign contiguous offsets starting at 0 (switch padding depends on them)."""
    out = []
    at = 0
    for ins in instructions:
        ins = replace(ins, offset=at)
        out.append(ins)
        at += ins.length()
    return out


def encode(instructions) -> bytes:
    return b"".join(ins.encode() for ins in instructions)
