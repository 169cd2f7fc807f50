"""Spectral solver for the free fall of a rigid sphere in a viscous liquid."""

__version__ = "0.1.0"
