"""Independent reference computations used to cross-check the library.

The detection oracle works on a plain description of classes and calls
(not on bytecode), derives receivers and dispatch targets itself and
enumerates every simple path by brute force.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from builders import jar
from dormant.classfile import ClassSpec, MethodSpec
from dormant.classfile import default_constructor as ctor
from dormant.classfile.model import ACC_ABSTRACT, ACC_INTERFACE, ACC_PUBLIC, ACC_STATIC

SER = "java/io/Serializable"
OBJ = "java/lang/Object"
RUNNABLE = "java/lang/Runnable"
INVOKE = ("java/lang/reflect/Method", "invoke", "(Ljava/lang/Object;[Ljava/lang/Object;)Ljava/lang/Object;")
FOR_NAME = ("java/lang/Class", "forName", "(Ljava/lang/String;)Ljava/lang/Class;")
SINKS = {INVOKE, FOR_NAME}
POOL = [("a", "()V"), ("b", "()V"), ("c", "()V")]
ENTRY_SIGS = [("hashCode", "()I"), ("toString", "()Ljava/lang/String;"),
              ("readObject", "(Ljava/io/ObjectInputStream;)V"), ("compareTo", "(Ljava/lang/Object;)I")]
CALLBACKS = {("readObject", "(Ljava/io/ObjectInputStream;)V"), ("readResolve", "()Ljava/lang/Object;"),
             ("readObjectNoData", "()V")}


# -- serializability ----------------------------------------------------------------------

def fixpoint_serializable(supertypes: dict[str, list[str]]) -> set[str]:
    """Names that reach the marker through supertype edges, by iteration to a fixpoint."""
    serial = {SER}
    changed = True
    while changed:
        changed = False
        for name, supers in supertypes.items():
            if name not in serial and any(s in serial for s in supers):
                serial.add(name)
                changed = True
    return serial - {SER}


# -- statistics -----------------------------------------------------------------------------

def textbook_pearson(xs, ys):
    n = len(xs)
    sx, sy = sum(xs), sum(ys)
    sxx = sum(x * x for x in xs)
    syy = sum(y * y for y in ys)
    sxy = sum(x * y for x, y in zip(xs, ys))
    num = n * sxy - sx * sy
    den = math.sqrt(n * sxx - sx * sx) * math.sqrt(n * syy - sy * sy)
    return num / den


# -- detection --------------------------------------------------------------------------

@dataclass
class MMethod:
    name: str
    desc: str
    static: bool = False
    abstract: bool = False
    calls: list[tuple[str, str, str, str]] = field(default_factory=list)  # (kind, owner, name, desc)


@dataclass
class MClass:
    name: str
    is_interface: bool
    is_abstract: bool
    super_name: str
    interfaces: list[str]
    methods: list[MMethod]


def random_model(rng: random.Random, max_classes: int = 10) -> list[MClass]:
    n = rng.randint(1, max_classes)
    classes: list[MClass] = []
    for i in range(n):
        name = f"r/C{i}"
        earlier_itf = [c.name for c in classes if c.is_interface]
        earlier_cls = [c.name for c in classes if not c.is_interface]
        roll = rng.random()
        if roll < 0.2:
            itfs = rng.sample(earlier_itf, rng.randint(0, len(earlier_itf)))
            if rng.random() < 0.3:
                itfs.append(SER)
            methods = [MMethod(m, d, abstract=True) for m, d in rng.sample(POOL, rng.randint(0, 2))]
            classes.append(MClass(name, True, True, OBJ, itfs, methods))
            continue
        super_name = rng.choice(earlier_cls) if earlier_cls and rng.random() < 0.5 else OBJ
        itfs = rng.sample(earlier_itf, rng.randint(0, min(2, len(earlier_itf))))
        if rng.random() < 0.3:
            itfs.append(RUNNABLE)
        if rng.random() < 0.4:
            itfs.append(SER)
        sigs = rng.sample(POOL, rng.randint(0, 3)) + rng.sample(ENTRY_SIGS, rng.randint(0, 2))
        if RUNNABLE in itfs and rng.random() < 0.8:
            sigs.append(("run", "()V"))
        methods = [MMethod(m, d) for m, d in sigs]
        if rng.random() < 0.3:
            methods.append(MMethod("s", "()V", static=True))
        classes.append(MClass(name, False, roll < 0.35, super_name, itfs, methods))

    itf_names = [c.name for c in classes if c.is_interface]
    cls_names = [c.name for c in classes if not c.is_interface]
    for c in classes:
        for m in c.methods:
            if m.abstract:
                continue
            for _ in range(rng.randint(0, 3)):
                r = rng.random()
                if r < 0.35 and cls_names:
                    owner = rng.choice(cls_names)
                    mname, mdesc = rng.choice(POOL + [("run", "()V"), ("hashCode", "()I")])
                    m.calls.append(("virtual", owner, mname, mdesc))
                elif r < 0.55:
                    if itf_names and rng.random() < 0.6:
                        owner = rng.choice(itf_names)
                        mname, mdesc = rng.choice(POOL)
                    else:
                        owner, mname, mdesc = RUNNABLE, "run", "()V"
                    m.calls.append(("interface", owner, mname, mdesc))
                elif r < 0.65 and cls_names:
                    m.calls.append(("static", rng.choice(cls_names), "s", "()V"))
                elif r < 0.75 and cls_names:
                    mname, mdesc = rng.choice(POOL)
                    m.calls.append(("special", rng.choice(cls_names), mname, mdesc))
                else:
                    owner, mname, mdesc = rng.choice(sorted(SINKS))
                    m.calls.append(("sink", owner, mname, mdesc))
    return classes


_RETURN = {"V": [("return",)], "I": [("iconst_0",), ("ireturn",)]}


def _body(m: MMethod) -> list:
    code = []
    for kind, owner, name, desc in m.calls:
        if kind == "sink" and name == "invoke":
            code += [("aconst_null",), ("aconst_null",), ("aconst_null",), ("invokevirtual", owner, name, desc),
                     ("pop",)]
        elif kind == "sink":
            code += [("aconst_null",), ("invokestatic", owner, name, desc), ("pop",)]
        elif kind == "static":
            code += [("invokestatic", owner, name, desc)]
        else:
            opcode = {"virtual": "invokevirtual", "interface": "invokeinterface", "special": "invokespecial"}[kind]
            code += [("aconst_null",), (opcode, owner, name, desc)]
            if desc.endswith("I"):
                code.append(("pop",))
    ret = m.desc[m.desc.index(")") + 1:]
    return code + _RETURN.get(ret, [("aconst_null",), ("areturn",)])


def model_artifact(model: list[MClass]):
    specs = []
    for c in model:
        methods = []
        for m in c.methods:
            access = ACC_PUBLIC | (ACC_STATIC if m.static else 0) | (ACC_ABSTRACT if m.abstract else 0)
            methods.append(MethodSpec(m.name, m.desc, access, None if m.abstract else _body(m)))
        if c.is_interface:
            specs.append(ClassSpec(c.name, OBJ, c.interfaces, ACC_PUBLIC | ACC_INTERFACE | ACC_ABSTRACT, [], methods))
        else:
            access = ACC_PUBLIC | 0x0020 | (ACC_ABSTRACT if c.is_abstract else 0)
            specs.append(ClassSpec(c.name, c.super_name, c.interfaces, access, [], [ctor(c.super_name), *methods]))
    return jar(*specs)


def _ref(owner, name, desc) -> str:
    return f"{owner}.{name}{desc}"


def oracle_chains(model: list[MClass], max_depth: int) -> set[tuple[str, ...]]:
    by_name = {c.name: c for c in model}
    supers = {c.name: [c.super_name] + list(c.interfaces) for c in model}
    serial = fixpoint_serializable(supers)

    def closure(name):
        out, todo = {name}, [name]
        while todo:
            for s in supers.get(todo.pop(), ()):
                if s not in out:
                    out.add(s)
                    todo.append(s)
        return out

    def declared(cname):
        c = by_name[cname]
        return {(m.name, m.desc): m for m in c.methods}

    def dispatch(receiver, name, desc):
        cur = receiver
        while cur in by_name:
            m = declared(cur).get((name, desc))
            if m is not None and not m.abstract and not m.static:
                return _ref(cur, name, desc)
            cur = by_name[cur].super_name
        return _ref(cur, name, desc)

    def static_target(owner, name, desc):
        cur = owner
        while cur in by_name:
            if (name, desc) in declared(cur):
                return _ref(cur, name, desc)
            cur = by_name[cur].super_name
        return _ref(cur, name, desc)

    receivers = [c.name for c in model if not c.is_interface and not c.is_abstract and c.name in serial]
    succ: dict[str, set[str]] = {}
    for c in model:
        for m in c.methods:
            src = _ref(c.name, m.name, m.desc)
            out = succ.setdefault(src, set())
            for kind, owner, name, desc in m.calls:
                if kind == "sink":
                    out.add(_ref(owner, name, desc))
                elif kind in ("static", "special"):
                    out.add(static_target(owner, name, desc))
                else:
                    if owner not in by_name:
                        out.add(_ref(owner, name, desc))
                    for r in receivers:
                        if owner in closure(r):
                            out.add(dispatch(r, name, desc))

    entries = set()
    trampolines = {("hashCode", "()I"), ("equals", "(Ljava/lang/Object;)Z"), ("toString", "()Ljava/lang/String;")}
    for c in model:
        if c.is_interface or c.name not in serial:
            continue
        taken = set()
        cur, depth = c.name, 0
        while cur in by_name:
            for m in by_name[cur].methods:
                sig = (m.name, m.desc)
                if m.abstract or m.static or sig in taken:
                    continue
                taken.add(sig)
                if (depth == 0 and sig in CALLBACKS) or sig in trampolines or m.name == "compareTo":
                    entries.add(_ref(cur, m.name, m.desc))
            cur, depth = by_name[cur].super_name, depth + 1

    sinks = {_ref(*s) for s in SINKS}
    found = set()

    def walk(path):
        node = path[-1]
        if node in sinks and len(path) >= 2:
            found.add(tuple(path))
        if len(path) == max_depth:
            return
        for nxt in succ.get(node, ()):
            if nxt not in path:
                walk(path + [nxt])

    for e in entries:
        walk([e])
    return found
