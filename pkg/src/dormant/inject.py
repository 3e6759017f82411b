"""The three gadget-enabling modifications and their two-stage combination."""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field, replace

from .archive import Artifact, is_injection_candidate, parse_classes, repackage
from .catalog import OBJECT, SERIALIZABLE, PlatformCatalog
from .classfile import (
    ClassFile, ClassFormatError, ClassSpec, FieldSpec, MemberInfo, MethodSpec, OffsetOverflow,
    PoolBuilder, assemble_class, rewrite_code,
)
from .classfile import opcodes as op
from .classfile.constpool import ConstantKind
from .classfile.descriptors import object_type, parse_method
from .classfile.model import ACC_FINAL, ACC_PRIVATE, ACC_PUBLIC, ACC_STATIC, ACC_SUPER
from .classfile.opcodes import Instruction
from .hierarchy import graph_from_classes, jcl_interfaces_of_serializable, serializability

DEFAULT_CALLER = "org/example/Caller"
FIELD_PREFIX = "const$"
_CONST_DESC = {ConstantKind.STRING: "Ljava/lang/String;", ConstantKind.CLASS: "Ljava/lang/Class;"}
_KIND_NAME = {ConstantKind.STRING: "String", ConstantKind.CLASS: "Class"}


class Pattern(enum.Enum):
    TRANSITIVE_SERIALIZABLE = "1"
    FINAL_PROPERTIES = "2"
    INTERFACE_REACHABILITY = "3"
    ALL = "all"


@dataclass(frozen=True)
class ExtractedConstant:
    class_name: str
    kind: str       # "String" | "Class"
    value: str
    field_name: str

    def to_json(self) -> dict:
        return {"class": self.class_name, "kind": self.kind, "value": self.value, "field": self.field_name}


@dataclass
class InjectionReport:
    pattern: Pattern
    classes_modified: list[str] = field(default_factory=list)
    constants_extracted: list[ExtractedConstant] = field(default_factory=list)
    caller_interfaces: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)
    caller_class: str | None = None
    caller_version: str | None = None
    stages: list["InjectionReport"] = field(default_factory=list)

    def to_json(self) -> dict:
        out = {
            "pattern": self.pattern.value,
            "classes_modified": {"count": len(self.classes_modified), "items": list(self.classes_modified)},
            "constants_extracted": {"count": len(self.constants_extracted),
                                    "items": [c.to_json() for c in self.constants_extracted]},
            "caller_interfaces": {"count": len(self.caller_interfaces), "items": list(self.caller_interfaces)},
            "warnings": list(self.warnings),
        }
        if self.caller_class is not None:
            out["caller"] = {"name": self.caller_class, "class_version": self.caller_version}
        if self.stages:
            out["stages"] = [s.to_json() for s in self.stages]
        return out


def _signature_warning(a: Artifact, report: InjectionReport) -> None:
    sigs = a.signature_entries()
    if sigs and (report.classes_modified or report.caller_class):
        report.warnings.append(
            f"archive is signed ({', '.join(sigs)}); signatures no longer match the modified content")


def _state(a: Artifact, catalog: PlatformCatalog):
    parsed, problems = parse_classes(a)
    graph = graph_from_classes(parsed.values(), catalog, problems)
    return parsed, graph, serializability(graph)


# -- pattern 1 -------------------------------------------------------------------

def pattern_transitive_serializable(a: Artifact, catalog: PlatformCatalog | None = None
                                    ) -> tuple[Artifact, InjectionReport]:
    """Make every non-serializable abstract class and interface list the
    serialization marker.

    Types are visited supertypes first, so a type that already inherits the
    marker from a type modified earlier in the same pass is left alone.
    """
    catalog = catalog or PlatformCatalog.builtin()
    parsed, graph, _ = _state(a, catalog)
    report = InjectionReport(Pattern.TRANSITIVE_SERIALIZABLE, warnings=list(graph.problems))
    paths = {cf.name: path for path, cf in parsed.items() if is_injection_candidate(path)}
    serial: dict[str, bool] = {SERIALIZABLE: True}
    replaced = {}

    def visit(name: str, stack: tuple) -> bool:
        if name in serial:
            return serial[name]
        node = graph.nodes.get(name)
        if node is None or name in stack:
            return False
        result = SERIALIZABLE in node.interface_names
        for s in node.supertypes:
            result = visit(s, stack + (name,)) or result
        path = paths.get(name)
        if not result and path is not None and (node.is_interface or node.is_abstract):
            replaced[path] = add_interface(parsed[path], SERIALIZABLE)
            report.classes_modified.append(name)
            result = True
        serial[name] = result
        return result

    for name in sorted(graph.nodes):
        visit(name, ())
    out = repackage(a, {p: replaced[p] for p in parsed if p in replaced})
    _signature_warning(a, report)
    return out, report


def add_interface(cf: ClassFile, name: str) -> ClassFile:
    pb = PoolBuilder(cf.constant_pool)
    idx = pb.class_ref(name)
    return replace(cf, constant_pool=pb.build(), interfaces=cf.interfaces + (idx,))


# -- pattern 2 -------------------------------------------------------------------

def pattern_final_properties(a: Artifact, catalog: PlatformCatalog | None = None
                             ) -> tuple[Artifact, InjectionReport]:
    """Move String/Class constants loaded by instance methods of serializable
    classes into private final fields initialized by every constructor."""
    catalog = catalog or PlatformCatalog.builtin()
    parsed, graph, view = _state(a, catalog)
    report = InjectionReport(Pattern.FINAL_PROPERTIES, warnings=list(graph.problems))
    replaced = {}
    for path, cf in parsed.items():
        if not is_injection_candidate(path) or cf.is_interface or not view.is_serializable(cf.name):
            continue
        try:
            result = extract_constants(cf)
        except (OffsetOverflow, ClassFormatError) as exc:
            report.warnings.append(f"{cf.name}: skipped ({type(exc).__name__}: {exc})")
            continue
        new_cf, extracted, warnings = result
        report.warnings.extend(warnings)
        if new_cf is not None:
            replaced[path] = new_cf
            report.classes_modified.append(cf.name)
            report.constants_extracted.extend(extracted)
    out = repackage(a, replaced)
    _signature_warning(a, report)
    return out, report


def constant_field_name(kind: str, value: str, taken: set[str]) -> str:
    digest = hashlib.sha256(f"{kind}:{value}".encode("utf-8")).hexdigest()
    for width in range(8, len(digest) + 1, 4):
        name = FIELD_PREFIX + digest[:width]
        if name not in taken:
            return name
    raise ValueError(f"cannot derive a free field name for {kind} {value!r}")


def _is_const_load(ins: Instruction, cf: ClassFile) -> bool:
    return ins.opcode in (op.LDC, op.LDC_W) and cf.constant_pool.kind(ins.operands[0]) in _CONST_DESC


def _const_key(cf: ClassFile, idx: int) -> tuple[ConstantKind, str]:
    pool = cf.constant_pool
    kind = pool.kind(idx)
    value = pool.string(idx) if kind is ConstantKind.STRING else pool.class_name(idx)
    return kind, value


def _delegation_offset(cf: ClassFile, body) -> tuple[int, str] | None:
    """Offset and owner of the constructor's super/this delegation call.

    Calls initializing objects created by ``new`` inside the constructor
    (for example arguments of the delegation) are skipped.
    """
    pending_new = 0
    for ins in body.instructions:
        if ins.name == "new":
            pending_new += 1
        elif ins.opcode == op.INVOKESPECIAL:
            owner, name, _ = cf.constant_pool.member_ref(ins.operands[0])
            if name != "<init>":
                continue
            if pending_new:
                pending_new -= 1
                continue
            return ins.offset, owner
    return None


def extract_constants(cf: ClassFile):
    """Returns (new ClassFile or None, extracted constants, warnings)."""
    warnings: list[str] = []
    sites: dict[int, list[int]] = {}            # method index -> offsets
    order: list[tuple[ConstantKind, str]] = []  # distinct constants, first-seen order
    for mi, m in enumerate(cf.methods):
        body = m.code
        if body is None:
            continue
        name = cf.member_name(m)
        if name in ("<init>", "<clinit>"):
            continue
        for ins in body.instructions:
            if not _is_const_load(ins, cf):
                continue
            if m.access_flags & ACC_STATIC:
                kind, value = _const_key(cf, ins.operands[0])
                warnings.append(f"{cf.name}.{name}: {_KIND_NAME[kind]} constant {value!r} "
                                f"in static method at offset {ins.offset} not extracted")
                continue
            key = _const_key(cf, ins.operands[0])
            if key not in order:
                order.append(key)
            sites.setdefault(mi, []).append(ins.offset)
    if not order:
        return None, [], warnings

    ctors = [(mi, m) for mi, m in enumerate(cf.methods) if cf.member_name(m) == "<init>" and m.code is not None]
    if not ctors:
        warnings.append(f"{cf.name}: no constructor to initialize extracted constants; class skipped")
        return None, [], warnings
    delegations = {}
    for mi, m in ctors:
        found = _delegation_offset(cf, m.code)
        if found is None:
            warnings.append(f"{cf.name}: constructor {cf.member_descriptor(m)} has no delegation call; class skipped")
            return None, [], warnings
        delegations[mi] = found

    pb = PoolBuilder(cf.constant_pool)
    taken = {cf.member_name(f) for f in cf.fields}
    fields = list(cf.fields)
    field_refs: dict[tuple[ConstantKind, str], int] = {}
    const_refs: dict[tuple[ConstantKind, str], int] = {}
    extracted = []
    for kind, value in order:
        kname = _KIND_NAME[kind]
        fname = constant_field_name(kname, value, taken)
        taken.add(fname)
        desc = _CONST_DESC[kind]
        fields.append(MemberInfo(ACC_PRIVATE | ACC_FINAL, pb.utf8(fname), pb.utf8(desc)))
        field_refs[kind, value] = pb.field_ref(cf.name, fname, desc)
        const_refs[kind, value] = pb.string(value) if kind is ConstantKind.STRING else pb.class_ref(value)
        extracted.append(ExtractedConstant(cf.name, kname, value, fname))
    pool = pb.build()

    def load(key):
        idx = const_refs[key]
        return Instruction(op.LDC if idx <= 0xFF else op.LDC_W, (idx,))

    methods = list(cf.methods)
    for mi, offsets in sites.items():
        body = methods[mi].code
        edits = []
        for off in offsets:
            key = _const_key(cf, body.at(off).operands[0])
            edits.append((off, [op.make("aload_0"), op.make("getfield", field_refs[key])]))
        methods[mi] = methods[mi].with_code(rewrite_code(body, edits, pool))

    for mi, (offset, owner) in delegations.items():
        if owner == cf.name:
            continue  # delegates to another constructor of this class, which initializes the fields
        body = methods[mi].code
        delegation = body.at(offset)
        init = [delegation]
        for key in order:
            init += [op.make("aload_0"), load(key), op.make("putfield", field_refs[key])]
        methods[mi] = methods[mi].with_code(rewrite_code(body, [(offset, init)], pool))

    new_cf = replace(cf, constant_pool=pool, fields=tuple(fields), methods=tuple(methods))
    return new_cf, extracted, warnings


# -- pattern 3 -------------------------------------------------------------------

def _field_name_for(interface: str, taken: set[str]) -> str:
    simple = interface.rsplit("/", 1)[-1].rsplit("$", 1)[-1]
    base = simple[:1].lower() + simple[1:]
    name, n = base, 2
    while name in taken:
        name, n = f"{base}{n}", n + 1
    return name


_ZERO = {"I": "iconst_0", "Z": "iconst_0", "B": "iconst_0", "C": "iconst_0", "S": "iconst_0",
         "J": "lconst_0", "F": "fconst_0", "D": "dconst_0"}


def build_caller(interfaces, catalog: PlatformCatalog, name: str = DEFAULT_CALLER
                 ) -> tuple[ClassFile, list[str]]:
    """Assemble the serializable Caller class housing one public field per
    interface plus a generic ``object`` field; its hashCode invokes every
    catalogued method of every housed interface."""
    warnings = []
    interfaces = sorted(interfaces)
    taken = {"object"}
    slots = []  # (field name, interface)
    for itf in interfaces:
        fname = _field_name_for(itf, taken)
        taken.add(fname)
        slots.append((fname, itf))
    by_type = {itf: fname for fname, itf in slots}
    fields = [FieldSpec(f, f"L{itf};", ACC_PUBLIC) for f, itf in slots]
    fields.append(FieldSpec("object", f"L{OBJECT};", ACC_PUBLIC))

    all_fields = slots + [("object", OBJECT)]
    if len(all_fields) < 255:
        ctor_desc = "(" + "".join(f"L{t};" for _, t in all_fields) + ")V"
        code = [("aload_0",), ("invokespecial", OBJECT, "<init>", "()V")]
        for i, (fname, t) in enumerate(all_fields, start=1):
            code += [("aload_0",), ("aload", i), ("putfield", name, fname, f"L{t};")]
    else:
        warnings.append(f"{len(all_fields)} fields exceed the parameter limit; constructor takes no arguments")
        ctor_desc = "()V"
        code = [("aload_0",), ("invokespecial", OBJECT, "<init>", "()V")]
    code.append(("return",))
    ctor = MethodSpec("<init>", ctor_desc, ACC_PUBLIC, code)

    body = []
    for fname, itf in slots:
        methods = catalog.interface_methods(itf)
        if not methods:
            warnings.append(f"no method signatures known for {itf}; field kept without calls")
        for mname, mdesc in methods:
            params, ret = parse_method(mdesc)
            body += [("aload_0",), ("getfield", name, fname, f"L{itf};")]
            for p in params:
                ref = object_type(p)
                if ref is not None and ref in by_type:
                    body += [("aload_0",), ("getfield", name, by_type[ref], f"L{ref};")]
                elif ref == OBJECT:
                    body += [("aload_0",), ("getfield", name, "object", f"L{OBJECT};")]
                elif p[0] in "L[":
                    body.append(("aconst_null",))
                else:
                    body.append((_ZERO[p],))
            body.append(("invokeinterface", itf, mname, mdesc))
            if ret in ("J", "D"):
                body.append(("pop2",))
            elif ret != "V":
                body.append(("pop",))
    body += [("iconst_0",), ("ireturn",)]
    hash_code = MethodSpec("hashCode", "()I", ACC_PUBLIC, body)

    spec = ClassSpec(name, OBJECT, [SERIALIZABLE], ACC_PUBLIC | ACC_SUPER, fields, [ctor, hash_code])
    return assemble_class(spec), warnings


def pattern_interface_reachability(a: Artifact, catalog: PlatformCatalog | None = None,
                                   caller_name: str = DEFAULT_CALLER) -> tuple[Artifact, InjectionReport]:
    catalog = catalog or PlatformCatalog.builtin()
    _, graph, view = _state(a, catalog)
    report = InjectionReport(Pattern.INTERFACE_REACHABILITY, warnings=list(graph.problems))
    interfaces = sorted(jcl_interfaces_of_serializable(graph, view, catalog))
    caller, warnings = build_caller(interfaces, catalog, caller_name)
    out = repackage(a, added=[caller])  # raises NameCollision
    report.caller_interfaces = interfaces
    report.warnings.extend(warnings)
    report.caller_class = caller_name
    report.caller_version = f"{caller.major_version}.{caller.minor_version}"
    _signature_warning(a, report)
    return out, report


# -- combined --------------------------------------------------------------------

def apply_all(a: Artifact, catalog: PlatformCatalog | None = None,
              caller_name: str = DEFAULT_CALLER) -> tuple[Artifact, InjectionReport]:
    """Stage one applies patterns 1 then 2; stage two recomputes
    serializability on that intermediate artifact and applies pattern 3."""
    catalog = catalog or PlatformCatalog.builtin()
    a1, r1 = pattern_transitive_serializable(a, catalog)
    a2, r2 = pattern_final_properties(a1, catalog)
    a3, r3 = pattern_interface_reachability(a2, catalog, caller_name)
    modified = list(dict.fromkeys(r1.classes_modified + r2.classes_modified))
    report = InjectionReport(
        Pattern.ALL,
        classes_modified=modified,
        constants_extracted=list(r2.constants_extracted),
        caller_interfaces=list(r3.caller_interfaces),
        warnings=list(dict.fromkeys(r1.warnings + r2.warnings + r3.warnings)),
        caller_class=r3.caller_class,
        caller_version=r3.caller_version,
        stages=[r1, r2, r3],
    )
    return a3, report


def inject(a: Artifact, pattern: Pattern, catalog: PlatformCatalog | None = None,
           caller_name: str = DEFAULT_CALLER) -> tuple[Artifact, InjectionReport]:
    if pattern is Pattern.TRANSITIVE_SERIALIZABLE:
        return pattern_transitive_serializable(a, catalog)
    if pattern is Pattern.FINAL_PROPERTIES:
        return pattern_final_properties(a, catalog)
    if pattern is Pattern.INTERFACE_REACHABILITY:
        return pattern_interface_reachability(a, catalog, caller_name)
    return apply_all(a, catalog, caller_name)
