"""Estimation, decomposition, and export utilities."""
