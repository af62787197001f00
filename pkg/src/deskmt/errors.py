"""Exception hierarchy shared across the toolkit."""


class DeskmtError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(DeskmtError):
    """Operands have incompatible shapes."""


class FullyMaskedError(DeskmtError):
    """A softmax was asked to normalize over zero unmasked positions."""


class NonFiniteGradientError(DeskmtError):
    """A gradient contained NaN or Inf at update time."""


class AlignmentError(DeskmtError):
    """Parallel files disagree on line count."""


class VocabularyError(DeskmtError):
    """Malformed vocabulary file or out-of-range token id."""


class CheckpointError(DeskmtError):
    """Checkpoint file is corrupt, truncated, or version-incompatible."""


class ConfigError(DeskmtError):
    """Invalid training or decoding configuration."""


class EnsembleError(DeskmtError):
    """Models in an ensemble are not mutually compatible."""
