"""Method bodies: decoding, offset-preserving rewriting and stack simulation."""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import opcodes as op
from .attributes import AttributeBlob, StackMapTable
from .constpool import ConstantKind, ConstantPool
from .descriptors import arg_slots, parse_method, slot_size
from .errors import ClassFormatError, EditTargetNotInstructionStart, MalformedAttribute, OffsetOverflow, Truncated
from .opcodes import Fmt, Instruction
from .reader import ByteReader, u2, u4

# dropped from edited methods because they map bytecode offsets we do not track
OFFSET_TABLES = frozenset({
    "LineNumberTable", "LocalVariableTable", "LocalVariableTypeTable",
    "RuntimeVisibleTypeAnnotations", "RuntimeInvisibleTypeAnnotations",
})


@dataclass(frozen=True)
class ExceptionHandler:
    start: int
    end: int
    handler: int
    catch_type: int  # pool index of the caught class, 0 = any


@dataclass(frozen=True)
class CodeBody:
    max_stack: int
    max_locals: int
    instructions: tuple[Instruction, ...]
    exception_handlers: tuple[ExceptionHandler, ...] = ()
    attributes: tuple = ()

    @property
    def code_length(self) -> int:
        if not self.instructions:
            return 0
        last = self.instructions[-1]
        return last.offset + last.length()

    def at(self, offset: int) -> Instruction:
        for ins in self.instructions:
            if ins.offset == offset:
                return ins
        raise EditTargetNotInstructionStart(f"no instruction starts at offset {offset}")

    def attribute(self, name: str):
        for a in self.attributes:
            if a.name == name:
                return a
        return None

    # -- (de)serialisation ---------------------------------------------------
    @classmethod
    def parse(cls, data: bytes, pool: ConstantPool) -> "CodeBody":
        r = ByteReader(data)
        max_stack, max_locals = r.u2(), r.u2()
        n = r.u4()
        code = r.read(n)
        try:
            instructions = op.decode(code)
        except Truncated as exc:
            raise MalformedAttribute(f"code array ends mid-instruction: {exc}") from None
        handlers = tuple(ExceptionHandler(r.u2(), r.u2(), r.u2(), r.u2()) for _ in range(r.u2()))
        attrs = []
        for _ in range(r.u2()):
            name_index = r.u2()
            blob = r.read(r.u4())
            name = pool.utf8(name_index)
            if name == "StackMapTable":
                attrs.append(StackMapTable.parse(name_index, blob))
            else:
                attrs.append(AttributeBlob(name_index, blob, name))
        if r.remaining():
            raise MalformedAttribute("trailing bytes after Code attribute")
        body = cls(max_stack, max_locals, tuple(instructions), handlers, tuple(attrs))
        body.check_targets()
        return body

    def encode(self) -> bytes:
        code = op.encode(self.instructions)
        if len(code) > 0xFFFF:
            raise OffsetOverflow(f"code length {len(code)} exceeds 65535 bytes")
        out = bytearray(u2(self.max_stack) + u2(self.max_locals) + u4(len(code)) + code)
        out += u2(len(self.exception_handlers))
        for h in self.exception_handlers:
            out += u2(h.start) + u2(h.end) + u2(h.handler) + u2(h.catch_type)
        out += u2(len(self.attributes))
        for a in self.attributes:
            out += a.encode()
        return bytes(out)

    def check_targets(self) -> None:
        starts = {i.offset for i in self.instructions}
        end = self.code_length
        for ins in self.instructions:
            for t in ins.targets():
                if t not in starts:
                    raise MalformedAttribute(f"{ins.name} at {ins.offset} targets {t}, not an instruction start")
        for h in self.exception_handlers:
            if h.start not in starts or h.handler not in starts or (h.end not in starts and h.end != end):
                raise MalformedAttribute(f"exception handler {h} does not align with instructions")


def _has_branch(ins: Instruction) -> bool:
    return ins.info.fmt in op.BRANCH_FORMATS


def rewrite_code(body: CodeBody, edits, pool: ConstantPool | None = None) -> CodeBody:
    """Replace single instructions by instruction sequences and re-fix every
    offset that refers into the code array.

    ``edits`` is an iterable of ``(offset, [Instruction, ...])``.  Replacements
    may not introduce new branch instructions, but may re-include the
    instruction they replace.  When ``pool`` is given, ``max_stack`` is
    raised to the simulated peak if the edits need more room.
    """
    edits = dict(_normalise_edits(body, edits))
    if not edits:
        return body

    new_seq: list[Instruction] = []
    anchors: dict[int, int] = {}  # old offset -> index in new_seq
    for ins in body.instructions:
        anchors[ins.offset] = len(new_seq)
        repl = edits.get(ins.offset)
        if repl is None:
            new_seq.append(ins)
            continue
        for r in repl:
            if _has_branch(r) and not (r.opcode == ins.opcode and r.operands == ins.operands):
                raise ClassFormatError(f"replacement at {ins.offset} introduces branch {r.name}")
            new_seq.append(r)

    placed = op.layout(new_seq)
    old_end = body.code_length
    new_end = placed[-1].offset + placed[-1].length() if placed else 0
    mapping = {old: placed[idx].offset for old, idx in anchors.items()}
    mapping[old_end] = new_end

    def remap(offset):
        try:
            return mapping[offset]
        except KeyError:
            raise EditTargetNotInstructionStart(f"offset {offset} is not an instruction boundary") from None

    # targets are still expressed in old offsets; translate them
    final = [ins.retarget(remap) for ins in placed]
    if new_end > 0xFFFF:
        raise OffsetOverflow(f"code length {new_end} exceeds 65535 bytes after edits")
    for ins in final:
        ins.encode()  # raises OffsetOverflow on 16-bit branch overflow

    handlers = tuple(
        ExceptionHandler(remap(h.start), remap(h.end), remap(h.handler), h.catch_type)
        for h in body.exception_handlers
    )
    attrs = []
    for a in body.attributes:
        if isinstance(a, StackMapTable):
            attrs.append(a.relocate(remap))
        elif a.name not in OFFSET_TABLES:
            attrs.append(a)

    out = replace(body, instructions=tuple(final), exception_handlers=handlers, attributes=tuple(attrs))
    if pool is not None:
        peak = max_stack_depth(out, pool)
        if peak > out.max_stack:
            out = replace(out, max_stack=peak)
    return out


def _normalise_edits(body: CodeBody, edits):
    starts = {i.offset for i in body.instructions}
    seen = set()
    for offset, repl in edits:
        if offset not in starts:
            raise EditTargetNotInstructionStart(f"offset {offset} is not the start of an instruction")
        if offset in seen:
            raise ClassFormatError(f"two edits target offset {offset}")
        seen.add(offset)
        yield offset, list(repl)


# -- stack simulation ----------------------------------------------------------

def stack_effect(ins: Instruction, pool: ConstantPool) -> tuple[int, int]:
    """(slots popped, slots pushed) for one instruction."""
    info = ins.info
    if info.pop is not None and info.push is not None:
        if ins.opcode in (op.LDC, op.LDC_W):
            kind = pool.kind(ins.operands[0])
            if kind in (ConstantKind.LONG, ConstantKind.DOUBLE):
                raise ClassFormatError(f"{ins.name} at {ins.offset} loads a wide constant")
        return info.pop, info.push
    code = ins.opcode
    if code in op.FIELD_OPS:
        _, _, desc = pool.member_ref(ins.operands[0])
        size = slot_size(desc)
        return {
            op.GETSTATIC: (0, size), op.PUTSTATIC: (size, 0),
            op.GETFIELD: (1, size), op.PUTFIELD: (1 + size, 0),
        }[code]
    if code == op.INVOKEDYNAMIC:
        _, desc = pool.dynamic_name_and_type(ins.operands[0])
        return arg_slots(desc), slot_size(parse_method(desc)[1])
    if code in op.INVOKES:
        _, _, desc = pool.member_ref(ins.operands[0])
        receiver = 0 if code == op.INVOKESTATIC else 1
        return arg_slots(desc) + receiver, slot_size(parse_method(desc)[1])
    if info.fmt is Fmt.MULTIANEWARRAY:
        return ins.operands[1], 1
    raise ClassFormatError(f"no stack effect known for {ins.name}")


def stack_depths(body: CodeBody, pool: ConstantPool) -> dict[int, int]:
    """Operand-stack depth (in slots) on entry to every reachable instruction.

    Raises ClassFormatError on underflow or when two paths reach an
    instruction with different depths.
    """
    index = {ins.offset: i for i, ins in enumerate(body.instructions)}
    depth: dict[int, int] = {}
    work: list[tuple[int, int]] = [(0, 0)] if body.instructions else []
    work += [(h.handler, 1) for h in body.exception_handlers]

    while work:
        offset, d = work.pop()
        seen = depth.get(offset)
        if seen is not None:
            if seen != d:
                raise ClassFormatError(f"inconsistent stack depth at {offset}: {seen} vs {d}")
            continue
        depth[offset] = d
        i = index[offset]
        ins = body.instructions[i]
        pop, push = stack_effect(ins, pool)
        if d < pop:
            raise ClassFormatError(f"stack underflow at {offset} ({ins.name})")
        after = d - pop + push
        name = ins.name
        if name in ("jsr", "jsr_w"):
            work.append((ins.operands[0], after))
            if i + 1 < len(body.instructions):
                work.append((body.instructions[i + 1].offset, d))
            continue
        for t in ins.targets():
            work.append((t, after))
        if ins.opcode not in op.UNCONDITIONAL and i + 1 < len(body.instructions):
            work.append((body.instructions[i + 1].offset, after))
    return depth


def max_stack_depth(body: CodeBody, pool: ConstantPool) -> int:
    peak = 0
    depths = stack_depths(body, pool)
    by_offset = {ins.offset: ins for ins in body.instructions}
    for offset, d in depths.items():
        pop, push = stack_effect(by_offset[offset], pool)
        peak = max(peak, d, d - pop + push)
    return peak
