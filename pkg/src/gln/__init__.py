"""Gated linear networks: online, locally trained mixtures of gated geometric mixers."""

__version__ = "0.1.0"
