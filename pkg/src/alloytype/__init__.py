"""Discrete alloy-type random Schroedinger operators: models, bounds, Monte Carlo checks."""

__version__ = "0.1.0"
