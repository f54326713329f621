"""Structured-sparsity additive Cox regression with theory diagnostics."""

__version__ = "0.1.0"
