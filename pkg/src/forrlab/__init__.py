"""Simulation toolkit for Forrelation-based pseudorandom quantum states."""

__version__ = "0.1.0"
