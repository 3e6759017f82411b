"""Reading, rewriting and writing JVM class files."""

from .assembler import ClassConst, ClassSpec, FieldSpec, Label, MethodSpec, assemble_class, default_constructor
from .code import CodeBody, ExceptionHandler, max_stack_depth, rewrite_code, stack_depths
from .constpool import ConstantKind, ConstantPool, PoolBuilder
from .errors import (
    BadDescriptor, ClassFormatError, EditTargetNotInstructionStart, MagicMismatch, MalformedAttribute,
    MalformedPool, OffsetOverflow, OverflowPool, Truncated, UnsupportedVersion,
)
from .model import ClassFile, MemberInfo, emit_class, parse_class
from .opcodes import Instruction, make

__all__ = [
    "BadDescriptor", "ClassConst", "ClassFile", "ClassFormatError", "ClassSpec", "CodeBody",
    "ConstantKind", "ConstantPool", "EditTargetNotInstructionStart", "ExceptionHandler", "FieldSpec",
    "Instruction", "Label", "MagicMismatch", "MalformedAttribute", "MalformedPool", "MemberInfo",
    "MethodSpec", "OffsetOverflow", "OverflowPool", "PoolBuilder", "Truncated", "UnsupportedVersion",
    "assemble_class", "default_constructor", "emit_class", "make", "max_stack_depth", "parse_class",
    "rewrite_code", "stack_depths",
]
