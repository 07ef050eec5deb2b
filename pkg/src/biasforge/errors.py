"""Exception hierarchy shared across the toolkit.

Every error raised by biasforge derives from BiasforgeError so callers (and
the CLI exit-code mapping) can distinguish data problems from external-service
failures.
"""


class BiasforgeError(Exception):
    """Base class for all biasforge errors."""


class SchemaError(BiasforgeError):
    """A structured file (factor space, manifest, model, report) is malformed."""


class UnsupportedFormat(SchemaError):
    """A file declares a format version this reader does not understand."""


# --- factor space -----------------------------------------------------------

class FactorSpaceError(BiasforgeError):
    pass


class DuplicateDimensionName(FactorSpaceError):
    pass


class EmptyDimension(FactorSpaceError):
    pass


class BadBaselineIndex(FactorSpaceError):
    pass


class DuplicateValueId(FactorSpaceError):
    pass


class UnknownDimension(FactorSpaceError):
    pass


class UnknownValueId(FactorSpaceError):
    pass


# --- camera geometry --------------------------------------------------------

class GeometryError(BiasforgeError):
    pass


class NonPositiveStep(GeometryError):
    pass


class ZeroLevels(GeometryError):
    pass


class DegenerateLookAt(GeometryError):
    pass


# --- variant expansion / subspace construction ------------------------------

class MissingDimension(BiasforgeError):
    pass


class NotAContextDimension(BiasforgeError):
    pass


class NotAVisualDimension(BiasforgeError):
    pass


class NoContextDimensions(BiasforgeError):
    pass


class SameDimension(BiasforgeError):
    pass


class IncompleteContext(BiasforgeError):
    pass


# --- metrics ----------------------------------------------------------------

class MetricsError(BiasforgeError):
    pass


class EmptyLog(MetricsError):
    pass


class DuplicateTrialKey(MetricsError):
    pass


class MixedAgents(MetricsError):
    pass


class EmptyTable(MetricsError):
    pass


class InsufficientValues(MetricsError):
    pass


class InsufficientFactorialData(MetricsError):
    pass


class UncategorizedColor(MetricsError):
    pass


class InconsistentLog(MetricsError):
    pass


# --- fairness pipeline ------------------------------------------------------

class FairnessError(BiasforgeError):
    pass


class AdjudicationParseError(FairnessError):
    """Base for violations of the adjudicator response contract."""


class MalformedJson(AdjudicationParseError):
    pass


class ExtraneousText(AdjudicationParseError):
    pass


class MissingKey(AdjudicationParseError):
    pass


class UnexpectedKey(AdjudicationParseError):
    pass


class InvalidAnswer(AdjudicationParseError):
    pass


class AdjudicatorTransportError(FairnessError):
    """The adjudicator service could not be reached or returned no usable body."""


class AllRequestsFailed(FairnessError):
    pass


class MaxIterationsExceeded(FairnessError):
    pass


class IncompleteReviews(FairnessError):
    pass


class IllegalPhaseTransition(FairnessError):
    pass


# --- semantic grounding -----------------------------------------------------

class SglError(BiasforgeError):
    pass


class SchemaViolation(SglError):
    pass


class NoManipulationObject(SglError):
    pass


class MultipleManipulationObjects(SglError):
    pass


class UnknownTarget(SglError):
    pass


class Indistinguishable(SglError):
    pass
