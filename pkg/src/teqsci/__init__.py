"""Time-evolved quantum-selected configuration interaction."""

__version__ = "0.1.0"
