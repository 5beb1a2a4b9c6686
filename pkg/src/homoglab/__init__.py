"""Numerical laboratory for random conductance fields on the lattice torus."""

__version__ = "0.1.0"
