"""Exception types shared across the package."""


class TopicAlignError(Exception):
    """Base class for all domain errors raised by this package."""


# --- corpus / file I/O ---------------------------------------------------

class MalformedFile(TopicAlignError):
    """A count file contains non-integer, negative, or ragged data."""


class EmptySample(TopicAlignError):
    """A sample row sums to zero."""


class DimensionTooSmall(TopicAlignError):
    """Fewer than two features in a count matrix."""


class IoFailure(TopicAlignError):
    """Reading or writing a file failed."""


class SchemaMismatch(TopicAlignError):
    """A serialized ensemble is missing required blocks."""


# --- configuration / shape checks ----------------------------------------

class InvalidConfig(TopicAlignError):
    """A hyperparameter or sampler configuration violates its invariants."""


class DimensionMismatch(TopicAlignError):
    """Two objects disagree on the number of features."""


class SampleCountMismatch(TopicAlignError):
    """Two membership matrices disagree on the number of samples."""


class LengthMismatch(TopicAlignError):
    """Two vectors of different lengths were compared."""


class ZeroVector(TopicAlignError):
    """Cosine similarity of a zero vector is undefined."""


class TooFewTopics(TopicAlignError):
    """Distinctiveness needs at least two topics."""


# --- transport ------------------------------------------------------------

class UnbalancedProblem(TopicAlignError):
    """Supply and demand totals differ beyond tolerance."""


class ZeroMass(TopicAlignError):
    """A transport problem with zero total supply."""


class TooLarge(TopicAlignError):
    """Instance exceeds the size limit of the brute-force oracle."""


# --- diagnostics ----------------------------------------------------------

class FinestLevel(TopicAlignError):
    """Refinement is undefined for topics in the finest model."""


class TooFewModels(TopicAlignError):
    """Plateau detection needs at least three models."""
