"""Kinodynamic planning toolkit: interleaved parallel graph search in a
low-dimensional space with full-dimensional B-spline trajectory optimization.
"""

__version__ = "0.1.0"
