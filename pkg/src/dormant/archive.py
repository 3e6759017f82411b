"""JAR/AAR containers: reading, deterministic writing and repackaging."""

from __future__ import annotations

import enum
import io
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from .classfile import ClassFile, ClassFormatError, emit_class, parse_class

CLASS_SUFFIX = ".class"
AAR_CLASSES = "classes.jar"
# 1980-01-01 00:00:00 is the earliest timestamp a ZIP entry can carry
FIXED_TIMESTAMP = (1980, 1, 1, 0, 0, 0)
COMPRESS_LEVEL = 6
_SIGNATURE_SUFFIXES = (".SF", ".RSA", ".DSA", ".EC")
_NOT_INJECTABLE = ("module-info.class", "package-info.class")


class ArchiveError(Exception):
    pass


class NotAnArchive(ArchiveError):
    pass


class CorruptContainer(ArchiveError):
    pass


class PathNotFound(ArchiveError):
    pass


class NameCollision(ArchiveError):
    pass


class ArtifactFormat(enum.Enum):
    JAR = "jar"
    AAR = "aar"


@dataclass(frozen=True)
class Artifact:
    """Immutable archive contents.

    For AAR artifacts ``entries`` holds the embedded classes container and
    ``outer`` the surrounding archive (with the classes container kept as raw
    bytes so it can be swapped on write).
    """

    entries: Mapping[str, bytes]
    format: ArtifactFormat = ArtifactFormat.JAR
    outer: Mapping[str, bytes] = field(default_factory=lambda: MappingProxyType({}))

    def __post_init__(self):
        if not isinstance(self.entries, MappingProxyType):
            object.__setattr__(self, "entries", MappingProxyType(dict(self.entries)))
        if not isinstance(self.outer, MappingProxyType):
            object.__setattr__(self, "outer", MappingProxyType(dict(self.outer)))

    @property
    def class_entries(self) -> list[str]:
        return [p for p in self.entries if p.endswith(CLASS_SUFFIX)]

    def signature_entries(self) -> list[str]:
        return [p for p in self.entries if is_signature_entry(p)]


def is_signature_entry(path: str) -> bool:
    return path.upper().startswith("META-INF/") and path.upper().endswith(_SIGNATURE_SUFFIXES)


def is_injection_candidate(path: str) -> bool:
    """Module and package descriptors are parsed but never modified."""
    return path.endswith(CLASS_SUFFIX) and path.rsplit("/", 1)[-1] not in _NOT_INJECTABLE


def class_path(name: str) -> str:
    return name + CLASS_SUFFIX


def build_artifact(entries: Mapping[str, bytes], fmt: ArtifactFormat = ArtifactFormat.JAR) -> Artifact:
    """Synthesize an artifact; entries are ordered lexicographically."""
    return Artifact({p: entries[p] for p in sorted(entries)}, fmt)


def _read_zip(data: bytes) -> dict[str, bytes]:
    if not zipfile.is_zipfile(io.BytesIO(data)):
        raise NotAnArchive("input is not a ZIP container")
    try:
        with zipfile.ZipFile(io.BytesIO(data)) as zf:
            out: dict[str, bytes] = {}
            for info in zf.infolist():
                if info.filename in out:
                    raise CorruptContainer(f"duplicate entry {info.filename!r}")
                out[info.filename] = zf.read(info)
            return out
    except (zipfile.BadZipFile, zipfile.LargeZipFile, EOFError, OSError, NotImplementedError) as exc:
        raise CorruptContainer(str(exc)) from None


def read_artifact(data: bytes, fmt: ArtifactFormat | None = None) -> Artifact:
    outer = _read_zip(data)
    if fmt is None:
        fmt = ArtifactFormat.AAR if AAR_CLASSES in outer and "AndroidManifest.xml" in outer else ArtifactFormat.JAR
    if fmt is ArtifactFormat.JAR:
        return Artifact(outer, fmt)
    if AAR_CLASSES not in outer:
        raise CorruptContainer(f"AAR without {AAR_CLASSES}")
    return Artifact(_read_zip(outer[AAR_CLASSES]), fmt, outer)


def load_artifact(path: str | Path) -> Artifact:
    path = Path(path)
    fmt = ArtifactFormat.AAR if path.suffix.lower() == ".aar" else None
    return read_artifact(path.read_bytes(), fmt)


def _write_zip(entries: Mapping[str, bytes]) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w") as zf:
        for path, payload in entries.items():
            info = zipfile.ZipInfo(path, FIXED_TIMESTAMP)
            info.create_system = 3
            if path.endswith("/"):
                info.external_attr = (0o40755 << 16) | 0x10
                info.compress_type = zipfile.ZIP_STORED
            else:
                info.external_attr = 0o644 << 16
                info.compress_type = zipfile.ZIP_DEFLATED
            zf.writestr(info, payload, compresslevel=COMPRESS_LEVEL)
    return buf.getvalue()


def write_artifact(a: Artifact) -> bytes:
    """Serialize deterministically: fixed timestamps and compression level."""
    if a.format is ArtifactFormat.JAR:
        return _write_zip(a.entries)
    outer = dict(a.outer)
    outer[AAR_CLASSES] = _write_zip(a.entries)
    return _write_zip(outer)


def repackage(a: Artifact, replaced: Mapping[str, ClassFile] | None = None,
              added: Iterable[ClassFile] = ()) -> Artifact:
    replaced = dict(replaced or {})
    for path in replaced:
        if path not in a.entries:
            raise PathNotFound(path)
    new_paths: dict[str, bytes] = {}
    for cf in added:
        path = class_path(cf.name)
        if path in a.entries or path in new_paths:
            raise NameCollision(f"class {cf.name} already present at {path}")
        new_paths[path] = emit_class(cf)
    if not replaced and not new_paths:
        return a
    entries = {p: (emit_class(replaced[p]) if p in replaced else b) for p, b in a.entries.items()}
    for p in sorted(new_paths):
        entries[p] = new_paths[p]
    return Artifact(entries, a.format, a.outer)


def parse_classes(a: Artifact) -> tuple[dict[str, ClassFile], list[str]]:
    """Parse every class entry; unparseable ones are reported, not raised."""
    parsed: dict[str, ClassFile] = {}
    problems: list[str] = []
    for path in a.class_entries:
        try:
            parsed[path] = parse_class(a.entries[path])
        except ClassFormatError as exc:
            problems.append(f"{path}: {type(exc).__name__}: {exc}")
    return parsed, problems
