"""Desk-scale multivariate observability forecaster and evaluation harness."""

__version__ = "0.1.0"
