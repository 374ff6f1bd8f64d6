"""Exception hierarchy for the winspeech pipeline."""


class WinspeechError(Exception):
    """Base class for all pipeline errors."""


class AudioFormatError(WinspeechError):
    """Malformed or unsupported WAV container / codec."""


class TextGridError(WinspeechError):
    """TextGrid syntax or invariant violation."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(WinspeechError):
    """Invalid manifests, matrices, embeddings, or file schemas."""


class NumericError(WinspeechError):
    """Non-finite values where finite ones are required (e.g. NaN loss)."""
