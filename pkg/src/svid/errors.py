"""Exception hierarchy shared by the svid pipeline stages."""


class SvidError(Exception):
    """Base class for all svid errors."""


# -- audio / corpus ----------------------------------------------------------

class NotWav(SvidError):
    """File is not a RIFF/WAVE container."""


class UnsupportedEncoding(SvidError):
    """WAV encoding other than 16-bit mono PCM."""


class Truncated(SvidError):
    """WAV file ends before its declared chunk sizes."""


class InvalidParam(SvidError):
    """Parameter outside its documented domain."""


class InsufficientUtterances(SvidError):
    """A speaker has fewer utterances than the split requires."""


# -- dsp ---------------------------------------------------------------------

class EmptySignal(SvidError):
    pass


class SignalTooShort(SvidError):
    """Signal shorter than one analysis frame."""


class LengthMismatch(SvidError):
    pass


# -- features ----------------------------------------------------------------

class LagTooLarge(SvidError):
    """Requested autocorrelation lag >= frame length."""


class NonPositiveEnergy(SvidError):
    """Zero-lag autocorrelation is not positive."""


class ConfigError(SvidError):
    pass


class TooFewFrames(SvidError):
    pass


# -- gmm ---------------------------------------------------------------------

class TooFewPoints(SvidError):
    pass


class DegenerateData(SvidError):
    """Training data has zero variance in some dimension."""


class DimMismatch(SvidError):
    pass


class ShapeMismatch(SvidError):
    pass


# -- svm ---------------------------------------------------------------------

class SingleClass(SvidError):
    """Binary training set contains only one label."""


class EmptyGrid(SvidError):
    pass


# -- harness / io ------------------------------------------------------------

class Empty(SvidError):
    pass


class EmptyRows(SvidError):
    pass


class IoError(SvidError):
    """File could not be read or written in the expected format."""
