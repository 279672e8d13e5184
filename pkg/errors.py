"""
Error types raised by the engine

Every message names the offending value (index, key, JSON path, row/column)
so a failed run explains itself without a debugger.
"""


class ALEngineError(Exception):
    """Base class for every engine error"""


class InvalidConfigError(ALEngineError, ValueError):
    """A configuration value or combination cannot be run"""


class InvalidInputError(ALEngineError, ValueError):
    """Input data violates an operation's precondition"""


class ShapeError(ALEngineError, ValueError):
    """Array widths or lengths do not line up"""


class ConsistencyError(ALEngineError):
    """Pool bookkeeping or cross-file contents disagree"""


class BudgetError(ALEngineError):
    """A selection would spend more oracle labels than the budget allows"""


class FormatError(ALEngineError, ValueError):
    """A file could not be parsed (bad magic, malformed cell, missing column)"""


class NumericalError(ALEngineError):
    """A computation produced NaN or Inf where a finite value is required"""
