"""Exceptions raised while reading, writing or rewriting class files."""


class ClassFormatError(Exception):
    """Base class for all class-file errors."""


class MagicMismatch(ClassFormatError):
    pass


class Truncated(ClassFormatError):
    pass


class UnsupportedVersion(ClassFormatError):
    pass


class MalformedPool(ClassFormatError):
    pass


class MalformedAttribute(ClassFormatError):
    pass


class OverflowPool(ClassFormatError):
    pass


class OffsetOverflow(ClassFormatError):
    pass


class EditTargetNotInstructionStart(ClassFormatError):
    pass


class BadDescriptor(ClassFormatError):
    pass
