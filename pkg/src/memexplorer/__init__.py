"""Analytical memory-hierarchy co-design toolkit for LLM inference accelerators."""

__version__ = "0.1.0"
