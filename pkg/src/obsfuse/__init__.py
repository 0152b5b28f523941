"""Fusing a small randomized sample with a large observational sample."""

__version__ = "0.1.0"
