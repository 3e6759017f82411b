"""Signatures of platform (JDK) types needed for hierarchy resolution and
for synthesizing interface calls."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .archive import Artifact, load_artifact, parse_classes
from .classfile.model import ACC_ABSTRACT, ACC_STATIC

OBJECT = "java/lang/Object"
SERIALIZABLE = "java/io/Serializable"


@dataclass(frozen=True)
class PlatformType:
    name: str
    is_interface: bool
    super_name: str | None = OBJECT
    interfaces: tuple[str, ...] = ()
    methods: tuple[tuple[str, str], ...] = ()  # abstract methods (name, descriptor)


def _itf(name, methods=(), extends=()):
    return PlatformType(name, True, OBJECT, tuple(extends), tuple(methods))


def _cls(name, super_name=OBJECT, interfaces=()):
    return PlatformType(name, False, super_name, tuple(interfaces))


_O = "Ljava/lang/Object;"
_S = "Ljava/lang/String;"

_BUILTIN = (
    PlatformType(OBJECT, False, None),
    _itf(SERIALIZABLE),
    _itf("java/io/Externalizable", [
        ("writeExternal", "(Ljava/io/ObjectOutput;)V"),
        ("readExternal", "(Ljava/io/ObjectInput;)V"),
    ], [SERIALIZABLE]),
    _itf("java/lang/Cloneable"),
    _itf("java/util/RandomAccess"),
    _itf("java/util/EventListener"),
    # interfaces whose methods activate dormant chains
    _itf("java/lang/Runnable", [("run", "()V")]),
    _itf("java/util/concurrent/Callable", [("call", f"(){_O}")]),
    _itf("java/awt/event/ActionListener", [("actionPerformed", "(Ljava/awt/event/ActionEvent;)V")],
         ["java/util/EventListener"]),
    _itf("java/beans/PropertyChangeListener", [("propertyChange", "(Ljava/beans/PropertyChangeEvent;)V")],
         ["java/util/EventListener"]),
    _itf("java/lang/reflect/InvocationHandler", [
        ("invoke", f"({_O}Ljava/lang/reflect/Method;[{_O}){_O}"),
    ]),
    _itf("java/sql/Wrapper", [
        ("unwrap", f"(Ljava/lang/Class;){_O}"),
        ("isWrapperFor", "(Ljava/lang/Class;)Z"),
    ]),
    _itf("javax/sql/CommonDataSource", [
        ("getLogWriter", "()Ljava/io/PrintWriter;"),
        ("setLogWriter", "(Ljava/io/PrintWriter;)V"),
        ("setLoginTimeout", "(I)V"),
        ("getLoginTimeout", "()I"),
        ("getParentLogger", "()Ljava/util/logging/Logger;"),
    ]),
    _itf("javax/sql/DataSource", [
        ("getConnection", "()Ljava/sql/Connection;"),
        ("getConnection", f"({_S}{_S})Ljava/sql/Connection;"),
    ], ["javax/sql/CommonDataSource", "java/sql/Wrapper"]),
    _itf("javax/sql/XADataSource", [
        ("getXAConnection", "()Ljavax/sql/XAConnection;"),
        ("getXAConnection", f"({_S}{_S})Ljavax/sql/XAConnection;"),
    ], ["javax/sql/CommonDataSource"]),
    _itf("java/lang/AutoCloseable", [("close", "()V")]),
    _itf("java/io/Closeable", [("close", "()V")], ["java/lang/AutoCloseable"]),
    _itf("java/io/Flushable", [("flush", "()V")]),
    _itf("java/sql/ResultSet", [
        ("next", "()Z"),
        ("close", "()V"),
        ("wasNull", "()Z"),
        ("getString", f"(I){_S}"),
        ("getObject", f"(I){_O}"),
        ("getObject", f"({_S}){_O}"),
    ], ["java/sql/Wrapper", "java/lang/AutoCloseable"]),
    _itf("javax/sql/RowSet", [
        ("execute", "()V"),
        ("setCommand", f"({_S})V"),
        ("setDataSourceName", f"({_S})V"),
        ("rollback", "()V"),
    ], ["java/sql/ResultSet"]),
    _itf("javax/xml/transform/Templates", [
        ("newTransformer", "()Ljavax/xml/transform/Transformer;"),
        ("getOutputProperties", "()Ljava/util/Properties;"),
    ]),
    _itf("java/sql/Statement", [
        ("execute", f"({_S})Z"),
        ("executeQuery", f"({_S})Ljava/sql/ResultSet;"),
        ("close", "()V"),
    ], ["java/sql/Wrapper", "java/lang/AutoCloseable"]),
    _itf("java/sql/PreparedStatement", [
        ("execute", "()Z"),
        ("executeQuery", "()Ljava/sql/ResultSet;"),
    ], ["java/sql/Statement"]),
    _itf("java/sql/Connection", [
        ("isValid", "(I)Z"),
        ("createStatement", "()Ljava/sql/Statement;"),
        ("prepareStatement", f"({_S})Ljava/sql/PreparedStatement;"),
        ("commit", "()V"),
        ("rollback", "()V"),
        ("close", "()V"),
        ("isClosed", "()Z"),
    ], ["java/sql/Wrapper", "java/lang/AutoCloseable"]),
    _itf("java/util/Iterator", [("hasNext", "()Z"), ("next", f"(){_O}")]),
    _itf("java/util/Enumeration", [("hasMoreElements", "()Z"), ("nextElement", f"(){_O}")]),
    _itf("java/lang/Iterable", [("iterator", "()Ljava/util/Iterator;")]),
    _itf("java/util/Collection", [
        ("size", "()I"),
        ("isEmpty", "()Z"),
        ("contains", f"({_O})Z"),
        ("iterator", "()Ljava/util/Iterator;"),
        ("toArray", f"()[{_O}"),
        ("add", f"({_O})Z"),
        ("remove", f"({_O})Z"),
        ("clear", "()V"),
    ], ["java/lang/Iterable"]),
    _itf("java/util/List", [
        ("get", f"(I){_O}"),
        ("set", f"(I{_O}){_O}"),
        ("indexOf", f"({_O})I"),
    ], ["java/util/Collection"]),
    _itf("java/util/Set", [], ["java/util/Collection"]),
    _itf("java/util/Map", [
        ("size", "()I"),
        ("isEmpty", "()Z"),
        ("containsKey", f"({_O})Z"),
        ("containsValue", f"({_O})Z"),
        ("get", f"({_O}){_O}"),
        ("put", f"({_O}{_O}){_O}"),
        ("remove", f"({_O}){_O}"),
        ("putAll", "(Ljava/util/Map;)V"),
        ("clear", "()V"),
        ("keySet", "()Ljava/util/Set;"),
        ("values", "()Ljava/util/Collection;"),
        ("entrySet", "()Ljava/util/Set;"),
    ]),
    _itf("java/util/Map$Entry", [
        ("getKey", f"(){_O}"),
        ("getValue", f"(){_O}"),
        ("setValue", f"({_O}){_O}"),
    ]),
    _itf("java/util/Comparator", [("compare", f"({_O}{_O})I")]),
    _itf("java/lang/Comparable", [("compareTo", f"({_O})I")]),
    _itf("java/lang/CharSequence", [
        ("length", "()I"),
        ("charAt", "(I)C"),
        ("subSequence", "(II)Ljava/lang/CharSequence;"),
    ]),
    _itf("java/util/function/Function", [("apply", f"({_O}){_O}")]),
    _itf("java/util/function/BiFunction", [("apply", f"({_O}{_O}){_O}")]),
    _itf("java/util/function/Supplier", [("get", f"(){_O}")]),
    _itf("java/util/function/Consumer", [("accept", f"({_O})V")]),
    _itf("java/util/function/Predicate", [("test", f"({_O})Z")]),
    _itf("java/io/ObjectInputValidation", [("validateObject", "()V")]),
    # serializable platform classes commonly extended by library code
    _cls("java/lang/Throwable", interfaces=[SERIALIZABLE]),
    _cls("java/lang/Exception", "java/lang/Throwable"),
    _cls("java/lang/RuntimeException", "java/lang/Exception"),
    _cls("java/lang/Error", "java/lang/Throwable"),
    _cls("java/io/IOException", "java/lang/Exception"),
    _cls("java/lang/IllegalArgumentException", "java/lang/RuntimeException"),
    _cls("java/lang/IllegalStateException", "java/lang/RuntimeException"),
    _cls("java/lang/Number", interfaces=[SERIALIZABLE]),
    _cls("java/lang/Enum", interfaces=["java/lang/Comparable", SERIALIZABLE]),
    _cls("java/util/EventObject", interfaces=[SERIALIZABLE]),
    _cls("java/util/AbstractCollection", interfaces=["java/util/Collection"]),
    _cls("java/util/AbstractList", "java/util/AbstractCollection", ["java/util/List"]),
    _cls("java/util/AbstractSet", "java/util/AbstractCollection", ["java/util/Set"]),
    _cls("java/util/AbstractMap", interfaces=["java/util/Map"]),
    _cls("java/util/ArrayList", "java/util/AbstractList",
         ["java/util/List", "java/util/RandomAccess", "java/lang/Cloneable", SERIALIZABLE]),
    _cls("java/util/HashMap", "java/util/AbstractMap", ["java/util/Map", "java/lang/Cloneable", SERIALIZABLE]),
    _cls("java/util/HashSet", "java/util/AbstractSet", ["java/util/Set", "java/lang/Cloneable", SERIALIZABLE]),
    _cls("java/util/Dictionary"),
    _cls("java/util/Hashtable", "java/util/Dictionary", ["java/util/Map", "java/lang/Cloneable", SERIALIZABLE]),
)


class PlatformCatalog:
    """Read-only map of platform type signatures."""

    def __init__(self, types: Mapping[str, PlatformType] | None = None, source: str = "builtin"):
        self._types = MappingProxyType(dict(types or {}))
        self.source = source

    @classmethod
    def builtin(cls) -> "PlatformCatalog":
        return cls({t.name: t for t in _BUILTIN}, "builtin")

    @classmethod
    def from_json(cls, path: str | Path) -> "PlatformCatalog":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        types = {}
        for row in data.get("types", []):
            types[row["name"]] = PlatformType(
                row["name"], bool(row.get("interface", False)), row.get("super", OBJECT),
                tuple(row.get("interfaces", ())), tuple((m[0], m[1]) for m in row.get("methods", ())),
            )
        return cls(types, f"json:{path}")

    @classmethod
    def from_artifact(cls, a: Artifact, source: str = "container") -> "PlatformCatalog":
        """Take signatures from a container of compiled platform classes."""
        parsed, _ = parse_classes(a)
        types = {}
        for cf in parsed.values():
            methods = tuple(
                (cf.member_name(m), cf.member_descriptor(m)) for m in cf.methods
                if m.access_flags & ACC_ABSTRACT and not m.access_flags & ACC_STATIC
            )
            types[cf.name] = PlatformType(cf.name, cf.is_interface, cf.super_name,
                                          tuple(cf.interface_names), methods)
        return cls(types, source)

    @classmethod
    def load(cls, path: str | Path | None) -> "PlatformCatalog":
        """Builtin catalog, optionally extended by a JSON file or class container."""
        base = cls.builtin()
        if path is None:
            return base
        path = Path(path)
        extra = cls.from_json(path) if path.suffix.lower() == ".json" else cls.from_artifact(load_artifact(path), str(path))
        return base.merged(extra)

    def merged(self, other: "PlatformCatalog") -> "PlatformCatalog":
        return PlatformCatalog({**self._types, **other._types}, f"{self.source}+{other.source}")

    def get(self, name: str) -> PlatformType | None:
        return self._types.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._types

    def __iter__(self):
        return iter(self._types)

    def __len__(self) -> int:
        return len(self._types)

    def interface_methods(self, name: str) -> tuple[tuple[str, str], ...]:
        t = self._types.get(name)
        return t.methods if t else ()

    def fingerprint(self) -> str:
        """Content digest, independent of where the signatures came from."""
        rows = [[t.name, t.is_interface, t.super_name, list(t.interfaces), [list(m) for m in t.methods]]
                for _, t in sorted(self._types.items())]
        return hashlib.sha256(json.dumps(rows, separators=(",", ":")).encode("utf-8")).hexdigest()


def is_platform_name(name: str) -> bool:
    return name.startswith(("java/", "javax/"))
