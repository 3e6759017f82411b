"""Assemble class files from a declarative description.

Method bodies are lists of tuples ``(mnemonic, *operands)`` and
:class:`Label` markers::

    MethodSpec("hashCode", "()I", code=[
        ("aload_0",),
        ("getfield", "a/Caller", "runnable", "Ljava/lang/Runnable;"),
        ("invokeinterface", "java/lang/Runnable", "run", "()V"),
        ("iconst_0",),
        ("ireturn",),
    ])

Operand conventions: ``ldc`` takes a ``str`` (String constant), an
``int`` (Integer constant) or :class:`ClassConst`; field and invoke
instructions take ``owner, name, descriptor``; branches take a label name;
``new``/``checkcast``/``instanceof``/``anewarray`` take a class name.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import opcodes as op
from .code import CodeBody, ExceptionHandler, max_stack_depth
from .constpool import PoolBuilder
from .descriptors import arg_slots, check_field, parse_method
from .errors import BadDescriptor, ClassFormatError
from .model import ACC_PUBLIC, ACC_STATIC, ACC_SUPER, MAGIC, ClassFile, CodeAttribute, MemberInfo
from .opcodes import Fmt, Instruction

OBJECT = "java/lang/Object"


@dataclass(frozen=True)
class Label:
    name: str


@dataclass(frozen=True)
class ClassConst:
    name: str


@dataclass
class FieldSpec:
    name: str
    descriptor: str
    access: int = 0x0002  # private


@dataclass
class MethodSpec:
    name: str
    descriptor: str
    access: int = ACC_PUBLIC
    code: list | None = None          # None => no Code attribute (abstract/native)
    handlers: list = field(default_factory=list)  # (start, end, handler, catch class | None)


@dataclass
class ClassSpec:
    name: str
    super_name: str | None = OBJECT
    interfaces: list[str] = field(default_factory=list)
    access: int = ACC_PUBLIC | ACC_SUPER
    fields: list[FieldSpec] = field(default_factory=list)
    methods: list[MethodSpec] = field(default_factory=list)
    version: tuple[int, int] | None = None  # (major, minor); None = lowest that fits


def default_constructor(super_name: str = OBJECT, access: int = ACC_PUBLIC) -> MethodSpec:
    return MethodSpec("<init>", "()V", access, [
        ("aload_0",),
        ("invokespecial", super_name, "<init>", "()V"),
        ("return",),
    ])


_LOCAL_WIDTH = {"l": 2, "d": 2}


def assemble_class(spec: ClassSpec) -> ClassFile:
    pb = PoolBuilder()
    this_class = pb.class_ref(spec.name)
    super_class = pb.class_ref(spec.super_name) if spec.super_name else 0
    interfaces = tuple(pb.class_ref(i) for i in spec.interfaces)

    fields = []
    for f in spec.fields:
        check_field(f.descriptor)
        fields.append(MemberInfo(f.access, pb.utf8(f.name), pb.utf8(f.descriptor)))

    uses_class_literal = False
    methods = []
    bodies = []
    for m in spec.methods:
        parse_method(m.descriptor)
        attrs = ()
        if m.code is not None:
            body, literal = _assemble_body(m, pb)
            uses_class_literal |= literal
            bodies.append(len(methods))
            attrs = (CodeAttribute(pb.utf8("Code"), body),)
        methods.append(MemberInfo(m.access, pb.utf8(m.name), pb.utf8(m.descriptor), attrs))

    pool = pb.build()
    # max_stack needs the final pool to resolve descriptors
    for i in bodies:
        body = methods[i].code
        methods[i] = methods[i].with_code(replace(body, max_stack=max_stack_depth(body, pool)))

    if spec.version is not None:
        major, minor = spec.version
    elif uses_class_literal:
        major, minor = 49, 0
    else:
        major, minor = 45, 3
    return ClassFile(MAGIC, minor, major, pool, spec.access, this_class, super_class,
                     interfaces, tuple(fields), tuple(methods), ())


def _assemble_body(m: MethodSpec, pb: PoolBuilder) -> tuple[CodeBody, bool]:
    seq: list[Instruction] = []
    label_at: dict[str, int] = {}   # label -> index of following instruction
    max_local = arg_slots(m.descriptor) + (0 if m.access & ACC_STATIC else 1)
    literal = False

    for item in m.code:
        if isinstance(item, Label):
            if item.name in label_at:
                raise ClassFormatError(f"duplicate label {item.name!r} in {m.name}")
            label_at[item.name] = len(seq)
            continue
        name, *args = item
        if name not in op.BY_NAME:
            raise ClassFormatError(f"unknown mnemonic {name!r}")
        ins, is_literal = _instruction(name, args, pb)
        literal |= is_literal
        seq.append(ins)
        max_local = max(max_local, _local_extent(name, ins))

    placed = op.layout(seq)
    end = placed[-1].offset + placed[-1].length() if placed else 0

    def resolve(label):
        if label not in label_at:
            raise ClassFormatError(f"undefined label {label!r} in {m.name}")
        idx = label_at[label]
        return placed[idx].offset if idx < len(placed) else end

    final = tuple(ins.retarget(resolve) for ins in placed)
    handlers = tuple(
        ExceptionHandler(resolve(s), resolve(e), resolve(h), pb.class_ref(t) if t else 0)
        for s, e, h, t in m.handlers
    )
    return CodeBody(0, max_local, final, handlers, ()), literal


def _local_extent(name: str, ins: Instruction) -> int:
    if name.endswith(("load", "store")) and ins.info.fmt is Fmt.LOCAL:
        return ins.operands[0] + _LOCAL_WIDTH.get(name[0], 1)
    if name[-2] == "_" and name[-1].isdigit() and name[1:-2] in ("load", "store"):
        return int(name[-1]) + _LOCAL_WIDTH.get(name[0], 1)
    if name == "iinc":
        return ins.operands[0] + 1
    return 0


def _instruction(name: str, args: list, pb: PoolBuilder) -> tuple[Instruction, bool]:
    code = op.BY_NAME[name]
    fmt = op.OPS[code].fmt
    literal = False
    if name in ("ldc", "ldc_w"):
        (value,) = args
        if isinstance(value, ClassConst):
            idx = pb.class_ref(value.name)
            literal = True
        elif isinstance(value, str):
            idx = pb.string(value)
        elif isinstance(value, int):
            idx = pb.integer(value)
        else:
            raise ClassFormatError(f"unsupported ldc operand {value!r}")
        if idx > 0xFF or name == "ldc_w":
            return Instruction(op.LDC_W, (idx,)), literal
        return Instruction(op.LDC, (idx,)), literal
    if code in op.FIELD_OPS:
        owner, fname, desc = args
        check_field(desc)
        return Instruction(code, (pb.field_ref(owner, fname, desc),)), False
    if code in op.INVOKES and code != op.INVOKEDYNAMIC:
        owner, mname, desc, *rest = args
        parse_method(desc)
        itf = code == op.INVOKEINTERFACE or bool(rest and rest[0])
        idx = pb.method_ref(owner, mname, desc, interface=itf)
        if code == op.INVOKEINTERFACE:
            return Instruction(code, (idx, arg_slots(desc) + 1, 0)), False
        return Instruction(code, (idx,)), False
    if fmt is Fmt.CP2:
        (cls,) = args
        return Instruction(code, (pb.class_ref(cls),)), False
    if fmt is Fmt.MULTIANEWARRAY:
        cls, dims = args
        return Instruction(code, (pb.class_ref(cls), dims)), False
    if fmt in (Fmt.BRANCH2, Fmt.BRANCH4):
        return Instruction(code, (args[0],)), False
    if fmt is Fmt.TABLESWITCH:
        low, labels, default = args
        return Instruction(code, (default, low, low + len(labels) - 1, tuple(labels), b"")), False
    if fmt is Fmt.LOOKUPSWITCH:
        cases, default = args
        pairs = tuple(sorted(cases.items()))
        return Instruction(code, (default, pairs, b"")), False
    if fmt is Fmt.INVOKEDYNAMIC:
        raise ClassFormatError("invokedynamic is not supported by the assembler")
    if fmt is Fmt.LOCAL and args[0] > 0xFF or fmt is Fmt.IINC and (args[0] > 0xFF or not -128 <= args[1] <= 127):
        return Instruction(code, tuple(args), wide=True), False
    if len(args) != _arity(fmt):
        raise ClassFormatError(f"{name} takes {_arity(fmt)} operand(s), got {len(args)}")
    return Instruction(code, tuple(args)), False


def _arity(fmt: Fmt) -> int:
    return {Fmt.NONE: 0, Fmt.IINC: 2}.get(fmt, 1)


__all__ = [
    "BadDescriptor", "ClassConst", "ClassSpec", "FieldSpec", "Label", "MethodSpec",
    "assemble_class", "default_constructor",
]
