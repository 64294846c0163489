"""Function-space integration for generalized Brownian motion."""

__version__ = "0.1.0"
