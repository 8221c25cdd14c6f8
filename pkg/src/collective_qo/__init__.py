"""Simulation and analysis toolkit for driven-dissipative collective quantum optics."""

__version__ = "0.1.0"
