"""Type graph, serializability status and cross-version change events."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

from .archive import Artifact, parse_classes
from .catalog import SERIALIZABLE, PlatformCatalog, is_platform_name
from .classfile import ClassFile


class Status(enum.Enum):
    NOT = "NOT"
    DIRECT = "DIRECT"
    TRANSITIVE = "TRANSITIVE"


class ChangeKind(enum.Enum):
    CLASS_ADDED = "CLASS_ADDED"
    CLASS_REMOVED = "CLASS_REMOVED"
    DIRECT_ADD = "DIRECT_ADD"
    DIRECT_REMOVE = "DIRECT_REMOVE"
    INDIRECT_ADD = "INDIRECT_ADD"
    INDIRECT_REMOVE = "INDIRECT_REMOVE"

    @property
    def is_add(self) -> bool:
        return self in (ChangeKind.CLASS_ADDED, ChangeKind.DIRECT_ADD, ChangeKind.INDIRECT_ADD)


@dataclass(frozen=True)
class TypeNode:
    name: str
    is_interface: bool
    is_abstract: bool
    super_name: str | None
    interface_names: tuple[str, ...]
    methods: tuple[tuple[str, str, int], ...] = ()
    defined_in_artifact: bool = True

    @property
    def supertypes(self) -> tuple[str, ...]:
        head = (self.super_name,) if self.super_name else ()
        return head + self.interface_names


@dataclass(frozen=True)
class TypeGraph:
    nodes: Mapping[str, TypeNode]
    unresolved: frozenset[str] = frozenset()
    problems: tuple[str, ...] = ()

    def artifact_nodes(self) -> list[TypeNode]:
        return [n for n in self.nodes.values() if n.defined_in_artifact]

    def ancestors(self, name: str) -> list[str]:
        """Resolved transitive supertypes, breadth first, each once."""
        out: list[str] = []
        seen = {name}
        queue = deque(self.nodes[name].supertypes if name in self.nodes else ())
        while queue:
            s = queue.popleft()
            if s in seen or s not in self.nodes:
                continue
            seen.add(s)
            out.append(s)
            queue.extend(self.nodes[s].supertypes)
        return out


def node_from_class(cf: ClassFile) -> TypeNode:
    methods = tuple((cf.member_name(m), cf.member_descriptor(m), m.access_flags) for m in cf.methods)
    return TypeNode(cf.name, cf.is_interface, cf.is_abstract, cf.super_name,
                    tuple(cf.interface_names), methods, True)


def graph_from_classes(classes, catalog: PlatformCatalog, problems=()) -> TypeGraph:
    """``classes`` is an iterable of ClassFile values defined by the artifact."""
    nodes: dict[str, TypeNode] = {}
    notes = list(problems)
    for cf in classes:
        if cf.is_module:
            continue
        if cf.name in nodes:
            notes.append(f"duplicate definition of {cf.name} ignored")
            continue
        nodes[cf.name] = node_from_class(cf)

    unresolved: set[str] = set()
    queue = deque(s for n in list(nodes.values()) for s in n.supertypes)
    while queue:
        s = queue.popleft()
        if s in nodes or s in unresolved:
            continue
        t = catalog.get(s)
        if t is None:
            unresolved.add(s)
            continue
        methods = tuple((m, d, 0x0401) for m, d in t.methods)  # public abstract
        nodes[s] = TypeNode(s, t.is_interface, t.is_interface, t.super_name, t.interfaces, methods, False)
        queue.extend(nodes[s].supertypes)
    return TypeGraph(MappingProxyType(nodes), frozenset(unresolved), tuple(notes))


def build_graph(a: Artifact, catalog: PlatformCatalog) -> TypeGraph:
    parsed, problems = parse_classes(a)
    return graph_from_classes(parsed.values(), catalog, problems)


@dataclass(frozen=True)
class SerializabilityView:
    status: Mapping[str, Status]
    serializable_count: int
    include_interfaces: bool = True
    artifact_names: frozenset[str] = field(default_factory=frozenset)

    def is_serializable(self, name: str) -> bool:
        return self.status.get(name, Status.NOT) is not Status.NOT

    def counts(self) -> dict[str, int]:
        out = {s.value: 0 for s in Status}
        for name in self.artifact_names:
            out[self.status[name].value] += 1
        return out


def serializability(g: TypeGraph, include_interfaces: bool = True) -> SerializabilityView:
    status: dict[str, Status] = {}
    # reverse reachability from the marker; safe on cyclic supertype graphs
    subtypes: dict[str, list[str]] = {}
    for name, node in g.nodes.items():
        for s in node.supertypes:
            subtypes.setdefault(s, []).append(name)
    serial: set[str] = {SERIALIZABLE}
    todo = [SERIALIZABLE]
    while todo:
        for sub in subtypes.get(todo.pop(), ()):
            if sub not in serial:
                serial.add(sub)
                todo.append(sub)

    for name, node in g.nodes.items():
        if SERIALIZABLE in node.interface_names:
            status[name] = Status.DIRECT
        elif name in serial:
            status[name] = Status.TRANSITIVE
        else:
            status[name] = Status.NOT

    names = frozenset(n.name for n in g.artifact_nodes())
    count = sum(
        1 for n in names
        if status[n] is not Status.NOT and (include_interfaces or not g.nodes[n].is_interface)
    )
    return SerializabilityView(MappingProxyType(status), count, include_interfaces, names)


@dataclass(frozen=True)
class ChangeEvent:
    kind: ChangeKind
    class_name: str
    cause_class: str | None = None

    def to_json(self) -> dict:
        return {"kind": self.kind.value, "class": self.class_name, "cause": self.cause_class}


def _lists_marker(g: TypeGraph, name: str) -> bool:
    node = g.nodes.get(name)
    return node is not None and SERIALIZABLE in node.interface_names


def diff_serializability(g_old: TypeGraph, g_new: TypeGraph) -> list[ChangeEvent]:
    """Classify every change in serializable-class membership between two
    consecutive versions.

    A class whose serializability changed only because its own supertype
    list changed (no ancestor changed) is classified as a direct change.
    """
    v_old, v_new = serializability(g_old), serializability(g_new)
    old_names, new_names = v_old.artifact_names, v_new.artifact_names
    events: dict[str, ChangeEvent] = {}
    pending_add: list[str] = []
    pending_remove: list[str] = []

    for name in sorted(old_names | new_names):
        was = name in old_names and v_old.is_serializable(name)
        now = name in new_names and v_new.is_serializable(name)
        if was == now:
            continue
        if name not in old_names:
            events[name] = ChangeEvent(ChangeKind.CLASS_ADDED, name)
        elif name not in new_names:
            events[name] = ChangeEvent(ChangeKind.CLASS_REMOVED, name)
        elif now and _lists_marker(g_new, name) and not _lists_marker(g_old, name):
            events[name] = ChangeEvent(ChangeKind.DIRECT_ADD, name)
        elif was and _lists_marker(g_old, name) and not _lists_marker(g_new, name):
            events[name] = ChangeEvent(ChangeKind.DIRECT_REMOVE, name)
        elif now:
            pending_add.append(name)
        else:
            pending_remove.append(name)

    _attribute(pending_add, g_new, events, ChangeKind.INDIRECT_ADD, ChangeKind.DIRECT_ADD,
               (ChangeKind.CLASS_ADDED, ChangeKind.DIRECT_ADD))
    _attribute(pending_remove, g_old, events, ChangeKind.INDIRECT_REMOVE, ChangeKind.DIRECT_REMOVE,
               (ChangeKind.CLASS_REMOVED, ChangeKind.DIRECT_REMOVE))
    return [events[n] for n in sorted(events)]


def _attribute(pending, graph, events, indirect, direct, root_kinds):
    """Attach each pending change to its nearest root-changed ancestor in
    ``graph``; a class without one changed through its own edges."""
    pending = list(pending)
    while pending:
        progress = False
        left = []
        for name in pending:
            ancestors = graph.ancestors(name)
            root = next((a for a in ancestors if a in events and events[a].kind in root_kinds), None)
            if root is not None:
                events[name] = ChangeEvent(indirect, name, root)
                progress = True
            elif not any(a in pending for a in ancestors):
                events[name] = ChangeEvent(direct, name)
                progress = True
            else:
                left.append(name)
        if not progress:  # only possible with cyclic hierarchies
            for name in left:
                events[name] = ChangeEvent(direct, name)
            left = []
        pending = left


def jcl_interfaces_of_serializable(g: TypeGraph, view: SerializabilityView,
                                   catalog: PlatformCatalog | None = None) -> set[str]:
    """Platform interfaces implemented, directly or by inheritance, by any
    serializable non-interface class of the artifact."""
    out: set[str] = set()
    for node in g.artifact_nodes():
        if node.is_interface or not view.is_serializable(node.name):
            continue
        for name in _implemented_interfaces(g, node.name, catalog):
            if is_platform_name(name) and name != SERIALIZABLE:
                out.add(name)
    return out


def _implemented_interfaces(g: TypeGraph, name: str, catalog) -> set[str]:
    out: set[str] = set()
    seen: set[str] = set()
    queue = deque([name])
    while queue:
        n = queue.popleft()
        if n in seen:
            continue
        seen.add(n)
        node = g.nodes.get(n)
        if node is None:
            t = catalog.get(n) if catalog is not None else None
            if t is None:
                continue
            supers, is_itf = ((t.super_name,) if t.super_name else ()) + t.interfaces, t.is_interface
        else:
            supers, is_itf = node.supertypes, node.is_interface
        if is_itf and n != name:
            out.add(n)
        queue.extend(supers)
        # interface names may be unresolved yet still be platform interfaces
        if node is not None:
            out.update(i for i in node.interface_names if i not in g.nodes and is_platform_name(i))
    return out
