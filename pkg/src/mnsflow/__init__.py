"""Pseudo-spectral solver for a Riesz-regularized Navier-Stokes model and its relatives."""

__version__ = "0.1.0"
