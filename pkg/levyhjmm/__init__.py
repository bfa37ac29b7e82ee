"""Lévy-driven HJMM term-structure toolkit."""

__version__ = "1.0.0"
