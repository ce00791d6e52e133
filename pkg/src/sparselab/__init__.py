"""Sparse non-Hermitian random matrices: sampling, graph encodings, and spectral checks."""

__version__ = "0.1.0"
