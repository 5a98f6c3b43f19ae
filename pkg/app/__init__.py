"""Lindblad spectral-gap analysis: the CLI shell around the ``app.lindblad`` library."""

__all__ = ["lindblad"]
