"""Structured compressed sensing toolkit: models, secant geometry, RIP, decoders."""

__version__ = "0.1.0"
