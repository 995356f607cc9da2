"""Exclusion-process kinetic Monte Carlo and hydrodynamic-scaling toolkit."""

__version__ = "0.1.0"
