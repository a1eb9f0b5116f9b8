"""Exception hierarchy shared by every matsplat module.

Two broad families matter to callers: ``FormatError`` covers files that
cannot be parsed or use an unsupported layout, ``DataError`` covers values
that parse fine but violate a type invariant. The CLI maps the first family
to exit code 2 and the second to exit code 3.
"""


class MatsplatError(Exception):
    """Base class for every error raised by this package."""


class FormatError(MatsplatError):
    """A file is malformed, truncated, or uses an unsupported layout."""


class UnsupportedModelError(FormatError):
    """A camera model string other than the supported pinhole models."""


class SchemaError(FormatError):
    """A JSON document does not match its expected schema."""


class DataError(MatsplatError):
    """Parsed values violate a type invariant."""


class ShapeError(DataError):
    """Array dimensions disagree where they must match."""


class DomainError(DataError):
    """A numeric argument is outside the mathematical domain of an operation."""


class UnmappedClassError(DataError):
    """A mesh carries class IDs that the material table does not define."""


class InputError(DataError):
    """An input is empty or too short for the requested operation."""
