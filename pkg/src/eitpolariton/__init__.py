"""Slow-light polaritons in a driven Lambda medium with moving atoms."""

__version__ = "0.1.0"
