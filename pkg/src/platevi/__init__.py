"""Finite element solvers for elliptic optimal control with pointwise state
constraints, posed as a fourth-order obstacle problem."""

__version__ = "0.1.0"
