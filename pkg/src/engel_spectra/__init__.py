"""Spectral computations for the sublaplacian of the Engel group.

Modules:

* :mod:`engel_group`: group law, dilations, invariant fields, convolution.
* :mod:`quartic_oscillator`: eigenpairs of ``-d^2 + (theta^2/2 - mu)^2``.
* :mod:`semiclassics`: phase-space volumes, Weyl counts, single and double wells.
* :mod:`spectral_sums`: summability integrals, the dual-sphere constant, magic formula.
* :mod:`frequency_space`: matrix coefficients, Fourier transform, heat kernel, distance.
* :mod:`cli`: batch driver.
"""

from .errors import AccuracyError, ConvergenceError, DomainError, ResolutionError, TruncationError

__all__ = [
    "AccuracyError",
    "ConvergenceError",
    "DomainError",
    "ResolutionError",
    "TruncationError",
]
