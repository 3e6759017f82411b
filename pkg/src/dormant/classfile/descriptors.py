"""Field and method descriptor parsing."""

from __future__ import annotations

import re

from .errors import BadDescriptor

_FIELD = re.compile(r"\[*(?:[BCDFIJSZ]|L[^;.\[/][^;.\[]*;)")
_PRIMITIVE_NAMES = {
    "B": "byte", "C": "char", "D": "double", "F": "float", "I": "int",
    "J": "long", "S": "short", "Z": "boolean", "V": "void",
}


def _field_at(desc: str, pos: int) -> int:
    m = _FIELD.match(desc, pos)
    if m is None:
        raise BadDescriptor(f"malformed descriptor {desc!r} at position {pos}")
    return m.end()


def check_field(desc: str) -> str:
    if _field_at(desc, 0) != len(desc):
        raise BadDescriptor(f"malformed field descriptor {desc!r}")
    return desc


def parse_method(desc: str) -> tuple[list[str], str]:
    """Split ``(IL...;)V`` into ([param descriptors], return descriptor)."""
    if not desc.startswith("("):
        raise BadDescriptor(f"method descriptor must start with '(': {desc!r}")
    params = []
    pos = 1
    while pos < len(desc) and desc[pos] != ")":
        end = _field_at(desc, pos)
        params.append(desc[pos:end])
        pos = end
    if pos >= len(desc):
        raise BadDescriptor(f"unterminated parameter list in {desc!r}")
    ret = desc[pos + 1:]
    if ret != "V":
        check_field(ret)
    return params, ret


def slot_size(desc: str) -> int:
    if desc == "V":
        return 0
    return 2 if desc in ("J", "D") else 1


def arg_slots(desc: str) -> int:
    params, _ = parse_method(desc)
    return sum(slot_size(p) for p in params)


def object_type(desc: str) -> str | None:
    """Internal name of an ``L...;`` descriptor, else None (primitives, arrays)."""
    if desc.startswith("L") and desc.endswith(";"):
        return desc[1:-1]
    return None


def pretty(desc: str) -> str:
    dims = len(desc) - len(desc.lstrip("["))
    base = desc[dims:]
    name = _PRIMITIVE_NAMES.get(base) or base[1:-1].replace("/", ".")
    return name + "[]" * dims
