"""Exception taxonomy shared by all pseval modules."""


class PsevalError(Exception):
    """Base class for every error raised by this package."""


class FormatError(PsevalError):
    """Malformed container or header (broken RIFF, bad manifest JSON, ...)."""


class UnsupportedCodecError(PsevalError):
    """Recognised container but an encoding we refuse to read."""


class ClippingError(PsevalError):
    """Samples outside [-1, 1] would be silently clipped by pcm16."""


class DegenerateSignalError(PsevalError):
    """A signal is silent (or otherwise unusable) where power is required."""


class AlignmentError(PsevalError):
    """Two signals that must be compared have incompatible length or rate."""


class InsufficientSignalError(PsevalError):
    """Too little speech survives silence gating for the metric to be defined."""


class InsufficientCorpusError(PsevalError):
    """A speaker does not have enough qualifying utterances for the split."""


class ConfigurationError(PsevalError):
    """Missing adapter, unresolvable path, or an invalid run configuration."""


class AdapterProtocolError(PsevalError):
    """An external adapter violated the stdout/exit-status contract."""


class MetricValidationError(PsevalError):
    """A metric value fell outside its defined range."""


class EvaluationGapsError(PsevalError):
    """Evaluation inputs are incomplete; carries one entry per gap.

    Raised instead of producing partial results, so a submission is either
    scored in full or rejected with a precise list of what is missing.
    """

    def __init__(self, message: str, gaps: list[dict]):
        super().__init__(message)
        self.gaps = gaps
