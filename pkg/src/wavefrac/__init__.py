"""DG elastodynamics staggered with a phase-field crack model."""

__version__ = "0.1.0"
