"""Finite element and transform solvers for Nwogu-type Boussinesq systems with wall boundaries."""

__version__ = "0.1.0"
