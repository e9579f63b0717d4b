"""Exception hierarchy shared by the oracle, the recovery engine and the CLI.

The CLI maps these onto exit codes: ``IdentificationError`` subclasses exit 3,
``OracleError`` subclasses exit 4, configuration problems exit 2.
"""


class NetIdentError(Exception):
    """Base class for every error raised by the package."""


class UsageError(NetIdentError, ValueError):
    """An operation was called with arguments that violate its contract."""


class DomainError(UsageError):
    """A covariate or value lies outside the configured support."""


class OracleError(NetIdentError):
    """Failures of the population oracle itself (numerics, ownership)."""


class OwnershipError(OracleError):
    """A handle issued by a different oracle was passed in."""


class NumericError(OracleError):
    """A root search or quadrature failed to produce a finite answer."""


class UnreachableTarget(OracleError):
    """The requested probability lies outside the range of the monotone query map.

    Attributes:
        target: the requested probability.
        low: infimum of the reachable range.
        high: supremum of the reachable range.
    """

    def __init__(self, target, low, high, message=None):
        self.target = float(target)
        self.low = float(low)
        self.high = float(high)
        if message is None:
            message = (f"target {self.target:.12g} outside reachable range "
                       f"[{self.low:.12g}, {self.high:.12g}]")
        super().__init__(message)


class IdentificationError(NetIdentError):
    """Base for failures of an identification argument."""


class IdentificationFailure(IdentificationError):
    """A recursion step could not be carried out.

    Attributes:
        stage: name of the pipeline stage that failed.
        detail: free-form context (offending grid point, bracket, ...).
    """

    def __init__(self, message, stage=None, detail=None):
        self.stage = stage
        self.detail = detail
        prefix = f"[{stage}] " if stage else ""
        super().__init__(prefix + message)


class DomainExceeded(IdentificationFailure):
    """A probability falls outside the identified range of F-hat."""


class BoundaryReached(IdentificationFailure):
    """Out-expansion hit the edge of a bounded fixed-effect support."""


class AssumptionViolated(IdentificationError):
    """A maintained assumption was found to fail on the oracle surface."""

    def __init__(self, assumption, message):
        self.assumption = assumption
        super().__init__(f"assumption {assumption} violated: {message}")


class FeasibilityError(IdentificationError):
    """Bounded-support anchors are not reachable.

    Attributes:
        low, high: reachable self-pair probability range.
    """

    def __init__(self, message, low=None, high=None):
        self.low = low
        self.high = high
        super().__init__(message)


class DesignSingular(IdentificationError):
    """Probe vectors for the parametric solve are (numerically) dependent."""

    def __init__(self, message, condition=None):
        self.condition = condition
        super().__init__(message)


class SaturationFailure(IdentificationError):
    """The scaled self-pair curve did not flatten before the search limit."""

    def __init__(self, message, curve=None):
        self.curve = curve
        super().__init__(message)


class AmbiguousConjecture(IdentificationError):
    """Several separated conjectures survive falsification."""

    def __init__(self, message, candidates=None):
        self.candidates = list(candidates or [])
        super().__init__(message)
