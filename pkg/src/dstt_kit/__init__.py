"""State transition tensors and their optimal rank-1 directional approximations."""

__version__ = "0.1.0"
