"""Exception hierarchy shared across the package.

Errors that come from bad input data derive from :class:`DataError` (CLI
exit code 3); numeric blow-ups derive from :class:`DivergenceError` (exit 4).
"""

from __future__ import annotations


class MobaSliceError(Exception):
    """Base class for all package errors."""


class DataError(MobaSliceError):
    """Input data could not be used."""


class IngestError(DataError):
    """A replay file failed parsing or timeline validation."""


class MalformedLine(IngestError):
    def __init__(self, line_no: int, detail: str = ""):
        self.line_no = line_no
        self.detail = detail
        super().__init__(f"line {line_no}: malformed record{': ' + detail if detail else ''}")


class SchemaViolation(IngestError):
    def __init__(self, line_no: int, field: str, detail: str = ""):
        self.line_no = line_no
        self.field = field
        self.detail = detail
        super().__init__(
            f"line {line_no}: field {field!r} invalid{': ' + detail if detail else ''}"
        )


class MissingMeta(IngestError):
    """The file does not start with a ``meta`` record."""


class InconsistentMatch(IngestError):
    """Records of several matches were mixed in one timeline."""


class HeroCountViolation(IngestError):
    def __init__(self, counts: dict[str, int]):
        self.counts = counts
        super().__init__(f"expected 10 distinct heroes, 5 per team; got {counts}")


class DuplicateHero(IngestError):
    def __init__(self, hero_id: int):
        self.hero_id = hero_id
        super().__init__(f"hero {hero_id} appears on both teams")


class NonMonotoneCounter(IngestError):
    def __init__(self, hero_id: int, field: str, time: int):
        self.hero_id = hero_id
        self.field = field
        self.time = time
        super().__init__(f"hero {hero_id}: counter {field!r} decreases at t={time}s")


class MissingHeroState(DataError):
    def __init__(self, hero_id: int, slice_time: int):
        self.hero_id = hero_id
        self.slice_time = slice_time
        super().__init__(f"hero {hero_id} has no record at or before t={slice_time}s")


class UnknownHero(DataError):
    def __init__(self, hero_id: int):
        self.hero_id = hero_id
        super().__init__(f"hero id {hero_id} outside the model's hero pool")


class EmptyDataset(DataError):
    """An operation received no slices."""


class IncompatibleCheckpoint(DataError):
    """A checkpoint does not match the data or its own declared schema."""


class DomainError(MobaSliceError, ValueError):
    """Argument outside a function's mathematical domain."""


class ConfigError(MobaSliceError, ValueError):
    """Invalid configuration value."""


class ShapeMismatch(MobaSliceError, ValueError):
    """Array shapes do not chain."""


class DivergenceError(MobaSliceError):
    """Training produced a non-finite loss."""
