"""Quaternionic phases, gauge potentials and Aharonov-Bohm holonomy on grids."""

__version__ = "0.1.0"
