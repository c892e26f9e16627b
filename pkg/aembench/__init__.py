"""Benchmark of deep inverse models for artificial electromagnetic material design."""

__version__ = "0.1.0"
