"""Zero-shot speech-to-singing style transfer."""

__version__ = "0.1.0"
