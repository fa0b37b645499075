"""Simulation and verification of convex minorants of Brownian paths."""

__version__ = "0.1.0"
