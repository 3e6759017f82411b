"""The ClassFile structure and its byte-exact reader/writer."""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import opcodes as op
from .attributes import AttributeBlob
from .code import CodeBody
from .constpool import ConstantKind as K
from .constpool import ConstantPool
from .errors import ClassFormatError, MagicMismatch, MalformedPool, Truncated, UnsupportedVersion
from .opcodes import Fmt
from .reader import ByteReader, u2, u4

MAGIC = 0xCAFEBABE
MIN_MAJOR = 45
MAX_MAJOR = 71  # Java 27

ACC_PUBLIC = 0x0001
ACC_PRIVATE = 0x0002
ACC_PROTECTED = 0x0004
ACC_STATIC = 0x0008
ACC_FINAL = 0x0010
ACC_SUPER = 0x0020
ACC_SYNCHRONIZED = 0x0020
ACC_BRIDGE = 0x0040
ACC_VARARGS = 0x0080
ACC_NATIVE = 0x0100
ACC_INTERFACE = 0x0200
ACC_ABSTRACT = 0x0400
ACC_SYNTHETIC = 0x1000
ACC_ANNOTATION = 0x2000
ACC_ENUM = 0x4000
ACC_MODULE = 0x8000


@dataclass(frozen=True)
class CodeAttribute:
    name_index: int
    body: CodeBody
    name: str = "Code"

    def encode(self) -> bytes:
        data = self.body.encode()
        return u2(self.name_index) + u4(len(data)) + data


@dataclass(frozen=True)
class MemberInfo:
    access_flags: int
    name_index: int
    descriptor_index: int
    attributes: tuple = ()

    @property
    def code(self) -> CodeBody | None:
        for a in self.attributes:
            if isinstance(a, CodeAttribute):
                return a.body
        return None

    def with_code(self, body: CodeBody) -> "MemberInfo":
        attrs = tuple(replace(a, body=body) if isinstance(a, CodeAttribute) else a for a in self.attributes)
        return replace(self, attributes=attrs)

    def encode(self) -> bytes:
        out = u2(self.access_flags) + u2(self.name_index) + u2(self.descriptor_index)
        return out + u2(len(self.attributes)) + b"".join(a.encode() for a in self.attributes)


@dataclass(frozen=True)
class ClassFile:
    magic: int
    minor_version: int
    major_version: int
    constant_pool: ConstantPool
    access_flags: int
    this_class: int
    super_class: int
    interfaces: tuple[int, ...]
    fields: tuple[MemberInfo, ...]
    methods: tuple[MemberInfo, ...]
    attributes: tuple = ()

    # convenience views
    @property
    def name(self) -> str:
        return self.constant_pool.class_name(self.this_class)

    @property
    def super_name(self) -> str | None:
        return self.constant_pool.class_name(self.super_class) if self.super_class else None

    @property
    def interface_names(self) -> list[str]:
        return [self.constant_pool.class_name(i) for i in self.interfaces]

    @property
    def is_interface(self) -> bool:
        return bool(self.access_flags & ACC_INTERFACE)

    @property
    def is_abstract(self) -> bool:
        return bool(self.access_flags & ACC_ABSTRACT)

    @property
    def is_module(self) -> bool:
        return bool(self.access_flags & ACC_MODULE)

    def member_name(self, m: MemberInfo) -> str:
        return self.constant_pool.utf8(m.name_index)

    def member_descriptor(self, m: MemberInfo) -> str:
        return self.constant_pool.utf8(m.descriptor_index)

    def find_method(self, name: str, desc: str | None = None) -> MemberInfo | None:
        for m in self.methods:
            if self.member_name(m) == name and (desc is None or self.member_descriptor(m) == desc):
                return m
        return None

    def find_field(self, name: str) -> MemberInfo | None:
        for f in self.fields:
            if self.member_name(f) == name:
                return f
        return None


def parse_class(data: bytes) -> ClassFile:
    """Decode a complete class file; Code attributes become CodeBody values."""
    r = ByteReader(data)
    if len(data) < 4:
        raise Truncated(f"{len(data)} byte(s) is too short for a class file")
    magic = r.u4()
    if magic != MAGIC:
        raise MagicMismatch(f"bad magic {magic:#010x}")
    minor, major = r.u2(), r.u2()
    if not MIN_MAJOR <= major <= MAX_MAJOR:
        raise UnsupportedVersion(f"class file version {major}.{minor} outside {MIN_MAJOR}..{MAX_MAJOR}")
    pool = ConstantPool.read(r)
    pool.validate()
    access = r.u2()
    this_class, super_class = r.u2(), r.u2()
    pool.entry(this_class, K.CLASS)
    if super_class:
        pool.entry(super_class, K.CLASS)
    interfaces = tuple(r.u2() for _ in range(r.u2()))
    for i in interfaces:
        pool.entry(i, K.CLASS)
    fields = tuple(_read_member(r, pool) for _ in range(r.u2()))
    methods = tuple(_read_member(r, pool, decode_code=True) for _ in range(r.u2()))
    attributes = _read_attributes(r, pool)
    if r.remaining():
        raise ClassFormatError(f"{r.remaining()} trailing byte(s) after class file")
    return ClassFile(magic, minor, major, pool, access, this_class, super_class,
                     interfaces, fields, methods, attributes)


def emit_class(cf: ClassFile) -> bytes:
    out = bytearray(u4(cf.magic) + u2(cf.minor_version) + u2(cf.major_version))
    out += cf.constant_pool.write()
    out += u2(cf.access_flags) + u2(cf.this_class) + u2(cf.super_class)
    out += u2(len(cf.interfaces)) + b"".join(u2(i) for i in cf.interfaces)
    for group in (cf.fields, cf.methods):
        out += u2(len(group))
        for m in group:
            out += m.encode()
    out += u2(len(cf.attributes)) + b"".join(a.encode() for a in cf.attributes)
    return bytes(out)


def _read_member(r: ByteReader, pool: ConstantPool, decode_code: bool = False) -> MemberInfo:
    access, name_index, desc_index = r.u2(), r.u2(), r.u2()
    pool.entry(name_index, K.UTF8)
    pool.entry(desc_index, K.UTF8)
    return MemberInfo(access, name_index, desc_index, _read_attributes(r, pool, decode_code))


def _read_attributes(r: ByteReader, pool: ConstantPool, decode_code: bool = False) -> tuple:
    attrs = []
    for _ in range(r.u2()):
        name_index = r.u2()
        data = r.read(r.u4())
        name = pool.utf8(name_index)
        if decode_code and name == "Code":
            body = CodeBody.parse(data, pool)
            _check_operands(body, pool)
            attrs.append(CodeAttribute(name_index, body))
        else:
            attrs.append(AttributeBlob(name_index, data, name))
    return tuple(attrs)


_LOADABLE = (K.INTEGER, K.FLOAT, K.STRING, K.CLASS, K.METHOD_TYPE, K.METHOD_HANDLE, K.DYNAMIC)
_CLASS_OPS = frozenset(op.BY_NAME[n] for n in ("new", "anewarray", "checkcast", "instanceof", "multianewarray"))


def _check_operands(body: CodeBody, pool: ConstantPool) -> None:
    for ins in body.instructions:
        fmt = ins.info.fmt
        if fmt not in (Fmt.CP1, Fmt.CP2, Fmt.INVOKEINTERFACE, Fmt.INVOKEDYNAMIC, Fmt.MULTIANEWARRAY):
            continue
        idx = ins.operands[0]
        c = ins.opcode
        if c in (op.LDC, op.LDC_W):
            want = _LOADABLE
        elif c == op.LDC2_W:
            want = (K.LONG, K.DOUBLE, K.DYNAMIC)
        elif c in op.FIELD_OPS:
            want = (K.FIELDREF,)
        elif c == op.INVOKEVIRTUAL:
            want = (K.METHODREF,)
        elif c in (op.INVOKESPECIAL, op.INVOKESTATIC):
            want = (K.METHODREF, K.INTERFACE_METHODREF)
        elif c == op.INVOKEINTERFACE:
            want = (K.INTERFACE_METHODREF,)
        elif c == op.INVOKEDYNAMIC:
            want = (K.INVOKE_DYNAMIC,)
        elif c in _CLASS_OPS:
            want = (K.CLASS,)
        else:
            continue
        try:
            pool.entry(idx, *want)
        except MalformedPool as exc:
            raise MalformedPool(f"{ins.name} at {ins.offset}: {exc}") from None
