"""Negative binomial run-off triangle models."""

__version__ = "0.1.0"
