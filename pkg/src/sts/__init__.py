"""Training-free surround-view temporal stereo depth estimation."""

__version__ = "0.1.0"
