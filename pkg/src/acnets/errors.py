"""Exception hierarchy shared across the package."""


class AcnetsError(Exception):
    """Base class for all package errors."""


# -- potential -------------------------------------------------------------

class DuplicateWell(AcnetsError):
    pass


class DimensionMismatch(AcnetsError):
    pass


class NotPositiveDefinite(AcnetsError):
    pass


class MonotonicityFail(AcnetsError):
    pass


# -- connections -----------------------------------------------------------

class NoConvergence(AcnetsError):
    pass


class EndpointDrift(AcnetsError):
    pass


class TriangleViolation(AcnetsError):
    def __init__(self, triple, msg=""):
        self.triple = tuple(triple)
        super().__init__(msg or f"triangle inequality violated for wells {self.triple}")


class NegativeEntry(AcnetsError):
    pass


# -- field_solver ----------------------------------------------------------

class ResolutionTooCoarse(AcnetsError):
    pass


class OverlappingTransitions(AcnetsError):
    pass


class BlowUp(AcnetsError):
    pass


# -- interface -------------------------------------------------------------

class DeltaOutOfRange(AcnetsError):
    pass


class InsufficientData(AcnetsError):
    pass


# -- network ---------------------------------------------------------------

class MissingSigma(AcnetsError):
    pass


class NoCorrespondence(AcnetsError):
    pass


class DegenerateJunction(AcnetsError):
    pass


class TargetTooFar(AcnetsError):
    pass


# -- optimizer -------------------------------------------------------------

class UnknownScenario(AcnetsError):
    pass


class AssertionFailure(AcnetsError):
    """A paper-backed scenario claim failed on the computed data."""


# -- testmap ---------------------------------------------------------------

class GeometryConflict(AcnetsError):
    pass


class NegativeExcessBeyondTolerance(AcnetsError):
    pass


# -- verify ----------------------------------------------------------------

class FiberOutsideGrid(AcnetsError):
    pass


class SandwichViolation(AcnetsError):
    pass


class TooFewQualifyingCells(AcnetsError):
    pass


# -- cli -------------------------------------------------------------------

class ConfigParse(AcnetsError):
    pass


class IncompatibleReports(AcnetsError):
    pass
