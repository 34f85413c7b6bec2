"""Exception hierarchy for bdarma.

Every error raised on purpose by the package derives from ``BdarmaError`` and
also from the builtin exception a caller would naturally catch (``ValueError``
for bad inputs, ``ArithmeticError`` for numerical breakdown, ``RuntimeError``
for exhausted fitting retries). The CLI maps these classes to exit codes.
"""

from typing import List, Optional


class BdarmaError(Exception):
    """Base class for all bdarma errors."""


class DomainError(BdarmaError, ValueError):
    """A value lies outside the domain of a transform or density.

    Attributes:
        index: Offending component or coordinate (1-based), when known
    """

    def __init__(self, message: str, index: Optional[int] = None):
        super().__init__(message)
        self.index = index


class UsageError(BdarmaError, ValueError):
    """An operation was called with arguments it cannot honour.

    Attributes:
        t: First time index that is missing/insufficient, when relevant
    """

    def __init__(self, message: str, t: Optional[int] = None):
        super().__init__(message)
        self.t = t


class ConfigError(BdarmaError, ValueError):
    """A configuration document failed to parse or validate.

    Attributes:
        line: 1-based line number of the offending key, when known
        key: Dotted key that failed, when known
    """

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")
        self.line = line
        self.key = key


class DataError(BdarmaError, ValueError):
    """An input data file is unusable.

    Attributes:
        row: 1-based data row (excluding the header) that failed, when known
    """

    def __init__(self, message: str, row: Optional[int] = None):
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(f"{prefix}{message}")
        self.row = row


class NonFiniteError(BdarmaError, ArithmeticError):
    """A log density evaluated to a non-finite value.

    Attributes:
        term: Which term broke ("likelihood", "prior", "jacobian")
    """

    def __init__(self, message: str, term: str):
        super().__init__(f"{term}: {message}")
        self.term = term


class FitFailedError(BdarmaError, RuntimeError):
    """All fitting attempts failed.

    Attributes:
        reasons: One reason code per failed attempt
    """

    def __init__(self, message: str, reasons: Optional[List[str]] = None):
        super().__init__(message)
        self.reasons = list(reasons or [])
