"""Audio-to-feature bridge: wav files in, ACF1 acoustic feature tracks out."""

__version__ = "0.1.0"
