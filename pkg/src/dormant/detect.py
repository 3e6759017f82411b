"""Deserialization-aware call graph and gadget-chain search."""

from __future__ import annotations

import enum
from collections import defaultdict, deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .archive import Artifact, parse_classes
from .catalog import PlatformCatalog
from .classfile import ClassFile
from .classfile import opcodes as op
from .classfile.model import ACC_ABSTRACT, ACC_STATIC
from .hierarchy import SerializabilityView, TypeGraph, graph_from_classes, serializability
from .inject import DEFAULT_CALLER

DEFAULT_MAX_DEPTH = 12


@dataclass(frozen=True, order=True)
class MethodRef:
    owner: str
    name: str
    descriptor: str

    def __str__(self) -> str:
        return f"{self.owner}.{self.name}{self.descriptor}"

    @classmethod
    def parse(cls, text: str) -> "MethodRef":
        head, paren, rest = text.partition("(")
        owner, _, name = head.rpartition(".")
        if not owner or not name or not paren:
            raise ValueError(f"not a method reference: {text!r}")
        return cls(owner, name, "(" + rest)

    def pretty(self) -> str:
        return f"{self.owner.replace('/', '.')}.{self.name}()"


class EdgeKind(enum.Enum):
    STATIC = "static"
    SPECIAL = "special"
    VIRTUAL = "virtual-resolved"
    INTERFACE = "interface-resolved"
    EXTERNAL = "external"   # call into a type outside the artifact, kept as declared


@dataclass(frozen=True, order=True)
class Edge:
    caller: MethodRef
    callee: MethodRef
    kind: EdgeKind = field(compare=False)
    offset: int = field(default=-1, compare=False)


@dataclass
class CallGraph:
    nodes: set[MethodRef]
    edges: list[Edge]
    view: SerializabilityView
    graph: TypeGraph
    unresolved_sites: list[str] = field(default_factory=list)

    def successors(self) -> dict[MethodRef, list[MethodRef]]:
        out: dict[MethodRef, set[MethodRef]] = defaultdict(set)
        for e in self.edges:
            out[e.caller].add(e.callee)
        return {k: sorted(v) for k, v in out.items()}


# -- catalogs ----------------------------------------------------------------------

@dataclass(frozen=True)
class MethodPattern:
    owner: str | None        # None = any owner
    name: str
    descriptor: str | None = None  # None = any descriptor

    def matches(self, ref: MethodRef) -> bool:
        return ((self.owner is None or self.owner == ref.owner) and self.name == ref.name
                and (self.descriptor is None or self.descriptor == ref.descriptor))

    def __str__(self) -> str:
        return f"{self.owner or '*'}.{self.name}{self.descriptor or ''}"

    @classmethod
    def parse(cls, text: str) -> "MethodPattern":
        """``owner.name`` or ``owner.name(desc)``; owner in dotted or slashed form."""
        text = text.strip()
        desc = None
        if "(" in text:
            text, rest = text.split("(", 1)
            desc = "(" + rest
        owner, _, name = text.rpartition(".")
        if not name:
            raise ValueError(f"bad method pattern {text!r}")
        return cls(owner.replace(".", "/") or None, name, desc)


def _p(dotted: str) -> MethodPattern:
    return MethodPattern.parse(dotted)


KEPT_SINKS = tuple(_p(s) for s in (
    "java.lang.reflect.Method.invoke",
    "java.lang.ClassLoader.defineClass",
    "org.springframework.jndi.JndiTemplate.lookup",
    "java.sql.PreparedStatement.execute",
    "java.io.FileOutputStream.write",
    "java.lang.ClassLoader.loadClass",
    "java.net.URL.openConnection",
    "java.sql.Statement.execute",
    "javax.naming.InitialContext.lookup",
    "java.lang.reflect.Constructor.newInstance",
    "java.io.FileOutputStream.<init>",
    "java.sql.PreparedStatement.executeQuery",
    "java.io.File.delete",
    "java.beans.Introspector.getBeanInfo",
    "java.net.URL.openStream",
    "java.sql.DriverManager.getConnection",
    "java.sql.Connection.prepareStatement",
    "java.nio.file.Files.newOutputStream",
    "javax.naming.Context.lookup",
    "java.lang.ProcessBuilder.<init>",
    "java.lang.Runtime.exec",
    "java.rmi.registry.Registry.lookup",
    "java.nio.file.Files.newBufferedWriter",
))

FILTERED_SINKS = tuple(_p(s) for s in (
    "java.io.FileInputStream.<init>",
    "java.lang.Class.forName",
    "java.lang.Class.getMethod",
    "java.lang.Class.getDeclaredMethod",
    "java.lang.ClassLoader.getResourceAsStream",
    "java.lang.Class.getResourceAsStream",
    "java.nio.file.Files.readAllLines",
    "java.io.FileReader.<init>",
    "org.xml.sax.XMLReader.parse",
    "java.io.RandomAccessFile.read",
    "java.io.RandomAccessFile.readFully",
    "java.nio.file.Files.newInputStream",
    "java.nio.file.Files.newBufferedReader",
    "java.nio.file.Files.readAllBytes",
    "java.util.zip.ZipInputStream.<init>",
    "com.esotericsoftware.kryo.Kryo.readClassAndObject",
))

CALLBACK_ENTRIES = (
    MethodPattern(None, "readObject", "(Ljava/io/ObjectInputStream;)V"),
    MethodPattern(None, "readResolve", "()Ljava/lang/Object;"),
    MethodPattern(None, "readObjectNoData", "()V"),
)
TRAMPOLINE_ENTRIES = (
    MethodPattern(None, "hashCode", "()I"),
    MethodPattern(None, "equals", "(Ljava/lang/Object;)Z"),
    MethodPattern(None, "compareTo", None),
    MethodPattern(None, "toString", "()Ljava/lang/String;"),
)
_CALLBACK_NAMES = frozenset(p.name for p in CALLBACK_ENTRIES)


@dataclass(frozen=True)
class SinkCatalog:
    kept: tuple[MethodPattern, ...] = KEPT_SINKS
    filtered: tuple[MethodPattern, ...] = FILTERED_SINKS

    def patterns(self, include_filtered: bool = True) -> tuple[MethodPattern, ...]:
        return self.kept + self.filtered if include_filtered else self.kept

    def is_sink(self, ref: MethodRef, include_filtered: bool = True) -> bool:
        return any(p.matches(ref) for p in self.patterns(include_filtered))

    def is_kept(self, ref: MethodRef) -> bool:
        return any(p.matches(ref) for p in self.kept)

    @classmethod
    def from_file(cls, path: str | Path) -> "SinkCatalog":
        """One pattern per line; a line ``[filtered]`` starts the filtered section."""
        kept, filtered = [], []
        target = kept
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if line.lower() == "[filtered]":
                target = filtered
                continue
            target.append(MethodPattern.parse(line))
        return cls(tuple(kept), tuple(filtered))

    def describe(self) -> dict:
        return {"kept": [str(p) for p in self.kept], "filtered": [str(p) for p in self.filtered]}


@dataclass(frozen=True)
class EntryCatalog:
    callbacks: tuple[MethodPattern, ...] = CALLBACK_ENTRIES
    trampolines: tuple[MethodPattern, ...] = TRAMPOLINE_ENTRIES

    @classmethod
    def from_file(cls, path: str | Path) -> "EntryCatalog":
        """Patterns one per line; names of deserialization callbacks are
        treated as callbacks, everything else as trampolines."""
        pats = [MethodPattern.parse(l.split("#", 1)[0]) for l in Path(path).read_text(encoding="utf-8").splitlines()
                if l.split("#", 1)[0].strip()]
        return cls(tuple(p for p in pats if p.name in _CALLBACK_NAMES),
                   tuple(p for p in pats if p.name not in _CALLBACK_NAMES))

    def describe(self) -> dict:
        return {"callbacks": [str(p) for p in self.callbacks], "trampolines": [str(p) for p in self.trampolines]}


# -- call graph ----------------------------------------------------------------------

class _Hierarchy:
    """Artifact classes plus resolution helpers used by the call graph."""

    def __init__(self, classes: dict[str, ClassFile], graph: TypeGraph):
        self.classes = classes
        self.graph = graph
        self.methods: dict[str, dict[tuple[str, str], int]] = {
            name: {(cf.member_name(m), cf.member_descriptor(m)): m.access_flags for m in cf.methods}
            for name, cf in classes.items()
        }
        self._subtypes: dict[str, set[str]] | None = None

    def is_concrete_class(self, name: str) -> bool:
        cf = self.classes.get(name)
        return cf is not None and not cf.is_interface and not cf.is_abstract

    def subtypes(self) -> dict[str, set[str]]:
        """Reflexive-transitive subtype sets over artifact classes."""
        if self._subtypes is None:
            subs: dict[str, set[str]] = defaultdict(set)
            for name in self.classes:
                subs[name].add(name)
                for t in [name] + self.graph.ancestors(name):
                    # unresolved supertypes still name the receiver type
                    for s in self.graph.nodes[t].supertypes:
                        subs[s].add(name)
            self._subtypes = subs
        return self._subtypes

    def resolve(self, cls: str, name: str, desc: str) -> MethodRef | None:
        """Implementation selected for ``cls.name(desc)``: walk the superclass
        chain; leaving the artifact yields a reference on the first outside
        class; then default methods of artifact interfaces."""
        current = cls
        seen = set()
        while current is not None and current not in seen:
            seen.add(current)
            methods = self.methods.get(current)
            if methods is None:
                return MethodRef(current, name, desc)
            flags = methods.get((name, desc))
            if flags is not None and not flags & ACC_ABSTRACT and not flags & ACC_STATIC:
                return MethodRef(current, name, desc)
            current = self.classes[current].super_name
        for itf in self.graph.ancestors(cls):
            methods = self.methods.get(itf)
            if methods and itf in self.classes and self.classes[itf].is_interface:
                flags = methods.get((name, desc))
                if flags is not None and not flags & ACC_ABSTRACT and not flags & ACC_STATIC:
                    return MethodRef(itf, name, desc)
        return None

    def resolve_static(self, owner: str, name: str, desc: str) -> MethodRef:
        """Static and special calls bind to the first declaring class found
        upwards from ``owner`` (or stay on ``owner`` when it is external)."""
        current = owner
        seen = set()
        while current is not None and current not in seen:
            seen.add(current)
            methods = self.methods.get(current)
            if methods is None:
                return MethodRef(current, name, desc)
            if (name, desc) in methods:
                return MethodRef(current, name, desc)
            current = self.classes[current].super_name
        return MethodRef(owner, name, desc)


def build_callgraph(a: Artifact, view: SerializabilityView | None = None,
                    catalog: PlatformCatalog | None = None) -> CallGraph:
    catalog = catalog or PlatformCatalog.builtin()
    parsed, problems = parse_classes(a)
    return callgraph_from_classes(list(parsed.values()), catalog, view, problems)


def callgraph_from_classes(class_files: list[ClassFile], catalog: PlatformCatalog,
                           view: SerializabilityView | None = None, problems=()) -> CallGraph:
    graph = graph_from_classes(class_files, catalog, problems)
    if view is None:
        view = serializability(graph)
    classes: dict[str, ClassFile] = {}
    for cf in class_files:
        if not cf.is_module:
            classes.setdefault(cf.name, cf)
    h = _Hierarchy(classes, graph)
    subtypes = h.subtypes()
    receivers = {n for n in classes if h.is_concrete_class(n) and view.is_serializable(n)}

    nodes: set[MethodRef] = set()
    edges: set[Edge] = set()
    unresolved: list[str] = []
    for cname, cf in classes.items():
        pool = cf.constant_pool
        for m in cf.methods:
            caller = MethodRef(cname, cf.member_name(m), cf.member_descriptor(m))
            nodes.add(caller)
            body = m.code
            if body is None:
                continue
            for ins in body.instructions:
                code = ins.opcode
                if code not in op.INVOKES or code == op.INVOKEDYNAMIC:
                    continue
                owner, name, desc = pool.member_ref(ins.operands[0])
                if owner.startswith("["):  # array clone() and friends
                    owner = "java/lang/Object"
                if code == op.INVOKESTATIC:
                    edges.add(Edge(caller, h.resolve_static(owner, name, desc), EdgeKind.STATIC, ins.offset))
                    continue
                if code == op.INVOKESPECIAL:
                    edges.add(Edge(caller, h.resolve_static(owner, name, desc), EdgeKind.SPECIAL, ins.offset))
                    continue
                kind = EdgeKind.INTERFACE if code == op.INVOKEINTERFACE else EdgeKind.VIRTUAL
                if owner not in classes:
                    edges.add(Edge(caller, MethodRef(owner, name, desc), EdgeKind.EXTERNAL, ins.offset))
                targets = set()
                for r in sorted(subtypes.get(owner, set()) & receivers):
                    impl = h.resolve(r, name, desc)
                    if impl is not None:
                        targets.add(impl)
                for t in targets:
                    edges.add(Edge(caller, t, kind, ins.offset))
                if not targets and owner in classes:
                    unresolved.append(f"{caller}@{ins.offset}: no deserializable receiver for {owner}.{name}{desc}")
    for e in edges:
        nodes.add(e.callee)
    return CallGraph(nodes, sorted(edges), view, graph, unresolved)


# -- chains --------------------------------------------------------------------------

@dataclass(frozen=True, order=True)
class GadgetChain:
    entry: MethodRef
    links: tuple[MethodRef, ...]
    sink: MethodRef

    @property
    def frames(self) -> tuple[MethodRef, ...]:
        return (self.entry,) + self.links + (self.sink,)

    def to_json(self) -> dict:
        return {
            "entry": str(self.entry),
            "links": [str(x) for x in self.links],
            "sink": str(self.sink),
            "length": len(self.frames),
        }

    @classmethod
    def from_json(cls, data: dict) -> "GadgetChain":
        return cls(MethodRef.parse(data["entry"]), tuple(MethodRef.parse(x) for x in data["links"]),
                   MethodRef.parse(data["sink"]))

    @classmethod
    def of(cls, frames) -> "GadgetChain":
        frames = tuple(frames)
        return cls(frames[0], frames[1:-1], frames[-1])


def entry_methods(cg: CallGraph, entries: EntryCatalog | None = None) -> list[MethodRef]:
    """Entry methods on deserializable classes.

    Deserialization callbacks must be declared by the serializable class
    itself; trampolines may be inherited from any superclass.
    """
    entries = entries or EntryCatalog()
    out: set[MethodRef] = set()
    graph = cg.graph
    for node in graph.artifact_nodes():
        if node.is_interface or not cg.view.is_serializable(node.name):
            continue
        chain = [node.name]
        cur = graph.nodes[node.name].super_name
        while cur is not None and cur in graph.nodes and graph.nodes[cur].defined_in_artifact and cur not in chain:
            chain.append(cur)
            cur = graph.nodes[cur].super_name
        seen_sigs = set()
        for depth, cname in enumerate(chain):
            for mname, mdesc, acc in graph.nodes[cname].methods:
                if acc & (ACC_ABSTRACT | ACC_STATIC) or (mname, mdesc) in seen_sigs:
                    continue
                seen_sigs.add((mname, mdesc))
                ref = MethodRef(cname, mname, mdesc)
                if depth == 0 and any(p.matches(ref) for p in entries.callbacks):
                    out.add(ref)
                elif any(p.matches(ref) for p in entries.trampolines):
                    out.add(ref)
    return sorted(out)


def find_chains(cg: CallGraph, entries: EntryCatalog | None = None, sinks: SinkCatalog | None = None,
                max_depth: int = DEFAULT_MAX_DEPTH, include_filtered: bool = True) -> list[GadgetChain]:
    """All simple entry-to-sink paths of at most ``max_depth`` frames."""
    sinks = sinks or SinkCatalog()
    starts = entry_methods(cg, entries)
    succ = cg.successors()
    sink_nodes = {n for n in cg.nodes if sinks.is_sink(n, include_filtered)}
    if not starts or not sink_nodes or max_depth < 2:
        return []

    # frames needed from each node to reach a sink; prunes hopeless branches
    preds: dict[MethodRef, set[MethodRef]] = defaultdict(set)
    for src, dsts in succ.items():
        for d in dsts:
            preds[d].add(src)
    dist = {s: 1 for s in sink_nodes}
    queue = deque(sorted(sink_nodes))
    while queue:
        n = queue.popleft()
        for p in preds[n]:
            if p not in dist:
                dist[p] = dist[n] + 1
                queue.append(p)

    found: set[tuple[MethodRef, ...]] = set()
    for start in starts:
        if dist.get(start, max_depth + 1) > max_depth:
            continue
        path = [start]
        on_path = {start}
        stack = [iter(succ.get(start, ()))]
        while stack:
            nxt = next(stack[-1], None)
            if nxt is None:
                stack.pop()
                on_path.discard(path.pop())
                continue
            if nxt in on_path or len(path) + dist.get(nxt, max_depth + 1) > max_depth:
                continue
            path.append(nxt)
            on_path.add(nxt)
            if nxt in sink_nodes:
                found.add(tuple(path))
            stack.append(iter(succ.get(nxt, ())))
    return sorted(GadgetChain.of(p) for p in found)


def filter_by_sinks(chains: Iterable[GadgetChain], mode: str = "kept-only",
                    sinks: SinkCatalog | None = None) -> list[GadgetChain]:
    if mode == "all":
        return list(chains)
    if mode != "kept-only":
        raise ValueError(f"unknown sink filter mode {mode!r}")
    sinks = sinks or SinkCatalog()
    return [c for c in chains if sinks.is_kept(c.sink)]


def _normalized(chain: GadgetChain, synthetic: frozenset[str]) -> tuple[MethodRef, ...]:
    return tuple(f for f in chain.frames if f.owner not in synthetic)


def diff_chains(original: Iterable[GadgetChain], modified: Iterable[GadgetChain],
                synthetic_owners: Iterable[str] = (DEFAULT_CALLER,)) -> list[GadgetChain]:
    """Chains of ``modified`` absent from ``original`` once frames of the
    synthetic Caller class are dropped from both sides."""
    synthetic = frozenset(synthetic_owners)
    before = {_normalized(c, synthetic) for c in original}
    out = []
    seen = set()
    for c in sorted(modified):
        if _normalized(c, synthetic) not in before and c not in seen:
            seen.add(c)
            out.append(c)
    return out


def detect(a: Artifact, catalog: PlatformCatalog | None = None, entries: EntryCatalog | None = None,
           sinks: SinkCatalog | None = None, max_depth: int = DEFAULT_MAX_DEPTH,
           mode: str = "kept-only") -> tuple[list[GadgetChain], CallGraph]:
    cg = build_callgraph(a, None, catalog)
    chains = find_chains(cg, entries, sinks, max_depth)
    return filter_by_sinks(chains, mode, sinks), cg
