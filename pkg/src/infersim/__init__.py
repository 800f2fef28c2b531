"""Trace-driven simulator for serving long-output reasoning models."""

__version__ = "0.1.0"
