"""Simulation and verification tools for stochastic porous medium equations."""

__version__ = "0.1.0"
