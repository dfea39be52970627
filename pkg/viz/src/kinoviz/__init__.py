"""Offline plot emission from kinoplan benchmark output files.

Reads only the harness's documented JSON formats (trajectory, summary);
no planner imports, so the two packages stay fully decoupled.
"""
from .render import plot_profiles, plot_scaling, plot_trajectory

__all__ = ["plot_trajectory", "plot_profiles", "plot_scaling"]
