"""Selective surface-code encoding for grid-based trapped-ion machines."""

__version__ = "0.1.0"
