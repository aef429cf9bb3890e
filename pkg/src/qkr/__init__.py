"""Quantum-kernel regression for semiconductor process data."""

__version__ = "0.1.0"
