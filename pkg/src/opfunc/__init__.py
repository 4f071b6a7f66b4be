"""Numerical tests and constructions for operator monotone, operator convex
and strongly operator convex functions."""

__version__ = "0.1.0"
