"""Exception hierarchy shared across the toolkit.

The CLI maps InputError to exit code 1 and InvariantError to exit code 2;
library callers can catch ChartfolioError to get both.
"""


class ChartfolioError(Exception):
    """Base class for all toolkit errors."""


class InputError(ChartfolioError):
    """Bad user input: unreadable files, malformed rows, invalid parameters."""


class InvariantError(ChartfolioError):
    """An internal contract was violated; indicates a bug, not bad input."""
