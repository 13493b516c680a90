"""Orbit weaving workbench: shifts, interval maps, entropies, shadowing, spectra."""

__version__ = "0.1.0"
