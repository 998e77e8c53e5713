"""Covariances, exact and Monte Carlo samplers, and fundamental martingales of fractional Brownian fields."""

__version__ = "0.1.0"
