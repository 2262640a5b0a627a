"""Exception types shared across the toolkit.

All input-validation failures derive from ValidationError so the CLI can map
them to a single exit code; I/O failures are left to the builtin OSError
hierarchy.
"""


class ValidationError(ValueError):
    """Base class for every precondition / invariant violation."""


class InputShapeError(ValidationError):
    """A vector or matrix does not have the dimensions the model requires."""


class DomainError(ValidationError):
    """An input coordinate lies outside the network's declared input range."""


class LayerRangeError(ValidationError):
    """A layer index is outside 1..L."""


class MissingLabelsError(ValidationError):
    """An operation that needs labels received an unlabeled dataset."""


class EmptyDatasetError(ValidationError):
    """An operation that needs data received an empty dataset."""


class BinningDomainError(ValidationError):
    """A value fell outside the binning domain [c, c+(N+1)*delta].

    Signals unsound bounds or data foreign to the network the spec was
    derived for.  Carries the offending location when known.
    """

    def __init__(self, message, *, value=None, point=None, neuron=None):
        super().__init__(message)
        self.value = value
        self.point = point
        self.neuron = neuron


class IncompatibleHistogramError(ValidationError):
    """Two histograms do not share binning spec, layer, or neuron subset."""


class WrongMethodError(ValidationError):
    """The greedy solver was asked to handle a multi-neuron instance."""


class ComparabilityError(ValidationError):
    """Two reports do not share the same class universe."""


class SampleSizeError(ValidationError):
    """A requested sample size exceeds what the source dataset can supply."""
