"""Simulation and verification toolkit for gradient spin models on the discrete torus.

Three conservative models share one interface: generalized KMP (continuous
energies, Beta redistribution), discrete KMP (uniform redistribution of
particles) and the Harmonic model (multi-particle jumps).
"""

from .models import ModelKind, ModelSpec, diffusion_coefficient

__all__ = ["ModelKind", "ModelSpec", "diffusion_coefficient"]
__version__ = "0.1.0"
