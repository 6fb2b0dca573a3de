"""Cœur numérique du laboratoire credlab."""

__version__ = "1.0.0"
