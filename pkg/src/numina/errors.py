"""Exception hierarchy for the numina pipeline.

Every error raised by the library derives from :class:`NuminaError` so callers
can catch at whatever granularity they need.  File-format problems get their
own branch (:class:`FormatError`) because the CLI maps them to a distinct exit
code.
"""


class NuminaError(Exception):
    """Base class for all numina errors."""


# --- file / container formats -------------------------------------------------

class FormatError(NuminaError):
    """Malformed or unreadable on-disk artifact."""


class BadMagic(FormatError):
    pass


class UnsupportedVersion(FormatError):
    pass


class DimensionMismatch(FormatError):
    """Declared sizes do not match the payload length."""


class NonFinite(NuminaError):
    """Tensor payload contains NaN or Inf."""


class InvalidBundle(NuminaError):
    """Bundle violates an invariant (carries the validation report)."""

    def __init__(self, report):
        self.report = report
        super().__init__(f"bundle invalid: {report.summary()}")


class IoFailure(NuminaError):
    pass


# --- prompt parsing -----------------------------------------------------------

class PromptError(NuminaError):
    pass


class NoCountableNoun(PromptError):
    """No (numeral, noun) pair could be extracted from the prompt."""


class AmbiguousBinding(PromptError):
    """A numeral has no bindable noun within the search window."""


class CountOutOfRange(PromptError):
    """Numeral outside the configured count range; rejected, never clamped."""


# --- layout construction and refinement ---------------------------------------

class EmptyRegion(NuminaError):
    pass


class NoRegion(NuminaError):
    """Requested a region operation on a category with no regions."""


class OutOfBounds(NuminaError):
    """Template placed at a center that does not fit inside the grid."""


class NoValidPlacement(NuminaError):
    """No candidate center admits the template (template larger than grid)."""


class RefinementStalled(NuminaError):
    """Edit loop stopped converging toward the target count."""


# --- guidance -----------------------------------------------------------------

class EmptyReference(NuminaError):
    pass


class MissingScores(NuminaError):
    """A copied-template addition requires a pre-softmax bundle."""


class DimMismatch(NuminaError):
    """Score matrix dimensions do not match the guidance field grid."""


# --- metrics ------------------------------------------------------------------

class TooFewFrames(NuminaError):
    """Temporal consistency needs at least two frames."""


# --- synthesis ----------------------------------------------------------------

class SpecOutOfBounds(NuminaError):
    """Scene spec places an instance outside the grid."""
