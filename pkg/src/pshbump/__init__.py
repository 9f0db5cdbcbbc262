"""Plurisubharmonic polynomial analysis and bumping toolkit."""

__version__ = "0.1.0"
