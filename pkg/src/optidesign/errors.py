"""Exception hierarchy shared by all optidesign modules.

Every error names the invariant it guards; the CLI surfaces the class name in
its exit-1 diagnostics.
"""


class OptidesignError(Exception):
    """Base class for all domain and numeric errors raised by this package."""


class NotPositiveDefinite(OptidesignError):
    """A matrix required to be (strictly) positive definite is not."""


class DimensionMismatch(OptidesignError):
    """Operand shapes are incompatible."""


class UnknownExperimentId(OptidesignError):
    """A design references an experiment id absent from the pool."""


class MissingObservation(OptidesignError):
    """estimate() was called without an observation for a designed experiment."""


class PoolExhausted(OptidesignError):
    """Without replacement, more selections were requested than the pool holds."""


class TooLarge(OptidesignError):
    """A brute-force enumeration would exceed the feasibility guard."""


class AllDegenerate(OptidesignError):
    """Every enumerated gain ratio had a near-zero denominator."""


class InvalidAlpha(OptidesignError):
    """A supplied alpha value is outside (0, 1] after projection."""


class DegenerateFactor(OptidesignError):
    """The product-form guarantee factor reached 1; no equivalent alpha exists."""


class RankDeficientTarget(OptidesignError):
    """The target map has (numerically) deficient row rank; the bound degenerates to 0."""


class ParseError(OptidesignError):
    """A ratings CSV line could not be parsed.

    :param line: 1-based line number of the offending row.
    """

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyTraining(OptidesignError):
    """The training split is empty, or a movie has no training ratings."""


class InternalConsistencyError(OptidesignError):
    """A quantity violated a mathematical invariant beyond numerical tolerance."""
