"""Archon: drive a formal proof project from an informal proof to a gated, verified artifact."""

__version__ = "0.1.0"
