"""Admissible sets and robust invariance for a controlled predator-prey model."""

__version__ = "0.1.0"
