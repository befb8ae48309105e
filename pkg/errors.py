"""
Gurarii Toolkit - Error Codes

Exception hierarchy shared by every module. Each exception knows the exit
code the command-line front end reports for it.
"""

from enum import IntEnum
from typing import Any, Optional


class ExitCode(IntEnum):
    """CLI exit codes"""
    OK = 0
    INTERNAL_ERROR = 1
    INVALID_INPUT = 2
    PRECISION_EXHAUSTED = 3
    HYPOTHESIS_VIOLATED = 4


class GurariiError(Exception):
    """Base class; `witness` carries the offending value when there is one"""
    exit_code = ExitCode.INVALID_INPUT

    def __init__(self, message: str, witness: Optional[Any] = None):
        super().__init__(message)
        self.witness = witness


# ==================== Invalid input (exit 2) ====================

class InvalidInput(GurariiError):
    exit_code = ExitCode.INVALID_INPUT


class GrammarError(InvalidInput):
    """Text does not match the magnitude/scalar/file grammar"""


class DimensionMismatch(InvalidInput):
    pass


class BackendMismatch(InvalidInput):
    pass


class NotInDomain(InvalidInput):
    """Vector is not in the span a map or subspace is defined on"""


class InconsistentMap(InvalidInput):
    """Images of linearly dependent base vectors disagree"""


class UnknownSuite(InvalidInput):
    pass


class CapsExceeded(InvalidInput):
    pass


class NonDecreasingStream(InvalidInput):
    pass


class DivisionByZero(InvalidInput):
    pass


class ZeroMagnitude(InvalidInput):
    """Operation undefined on the zero magnitude (root, coset, division)"""


# ==================== Precision (exit 3) ====================

class PrecisionExhausted(GurariiError):
    """Hahn truncation hides the leading term"""
    exit_code = ExitCode.PRECISION_EXHAUSTED


# ==================== Hypothesis violations (exit 4) ====================

class HypothesisViolation(GurariiError):
    exit_code = ExitCode.HYPOTHESIS_VIOLATED


class NotInValueGroup(HypothesisViolation):
    pass


class EmptyIntersection(HypothesisViolation):
    pass


class DefectTooLow(HypothesisViolation):
    pass


class NotDenselyValued(HypothesisViolation):
    pass


class AllocatorExhausted(HypothesisViolation):
    pass


class OperatorNormNotBelowOne(HypothesisViolation):
    pass


class NotImmediate(HypothesisViolation):
    pass


class Unsupported(HypothesisViolation):
    pass


class NotIsometric(HypothesisViolation):
    pass


# ==================== Results ====================

class NoGap(GurariiError):
    """No value-set gap around s1; `witness` is the blocking value-set point"""
    exit_code = ExitCode.OK
