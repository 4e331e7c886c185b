"""Negative definiteness of powers of geodesic distances and fractional Brownian fields."""

__version__ = "0.1.0"
