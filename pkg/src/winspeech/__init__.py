"""winspeech: prosody-based win/lose classification for interview audio."""

__version__ = "0.1.0"
