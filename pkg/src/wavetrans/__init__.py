"""Incoherent wave-energy transport in random waveguides and source inversion."""

__version__ = "0.1.0"
