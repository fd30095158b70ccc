"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, file/format
problems exit 2, contract/shape violations exit 3, numerical failures exit 4.
"""


class SsnlError(Exception):
    """Base class for all package errors."""


class ShapeError(SsnlError):
    """Operand shapes are incompatible with an operation's contract."""


class ConfigError(SsnlError):
    """A configuration value is out of the accepted domain."""


class ContractError(SsnlError):
    """A precondition of an operation was violated by the caller."""


class FormatError(SsnlError):
    """A file does not conform to its declared on-disk format."""


class MagicError(FormatError):
    """The magic/version line of a file is wrong."""


class TruncatedError(FormatError):
    """A file ended before its declared payload was complete."""


class HeaderError(FormatError):
    """A file header declares impossible dimensions or is unparseable."""


class NumericalError(SsnlError):
    """A numerical invariant failed (non-finite value, failed check)."""
