"""Penalized (soft-killed) Markov processes: simulation, conditional laws and contraction checks."""

__version__ = "0.1.0"
