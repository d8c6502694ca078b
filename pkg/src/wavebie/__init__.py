"""Time-domain boundary-integral toolkit for the wave equation (N = 1, 2, 3)."""

__version__ = "0.1.0"
