"""Numerical laboratory for length spectra, entropy and pressure forms of
Hitchin representations of rank-2 free Fuchsian groups."""

__version__ = "0.1.0"
