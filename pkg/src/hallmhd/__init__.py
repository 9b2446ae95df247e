"""Randomized-data mild solutions for fractional Hall MHD on the 3-torus.

Submodules: ``spectral_core`` (grid, fields, norms), ``semigroup``
(fractional heat flow and kernel estimates), ``randomization`` (diagonal
randomization, moment checks), ``dynamics`` (nonlinear terms, energy and
scaling diagnostics), ``mild_solver`` (Duhamel maps, Picard iteration,
reference integrator), ``ensemble_stats`` (Monte Carlo tail and moment
statistics), ``io`` (binary dumps) and ``cli``.
"""

from .spectral_core import Grid, NormSpec, SpectralField, Trajectory, get_grid

__all__ = ["Grid", "NormSpec", "SpectralField", "Trajectory", "get_grid"]
__version__ = "0.1.0"
