"""Bit-error-rate analysis of ambient backscatter links under Rayleigh fading."""

__version__ = "0.1.0"
