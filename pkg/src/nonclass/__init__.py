"""Moment-matrix nonclassicality witnesses and their multicopy optical measurement."""

__version__ = "0.1.0"
