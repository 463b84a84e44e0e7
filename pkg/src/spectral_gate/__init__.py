"""Frequency-aware gated networks: radial spectral decomposition, GLU blocks, GmNet."""

__version__ = "0.1.0"
