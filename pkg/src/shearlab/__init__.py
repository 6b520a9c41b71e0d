"""Spectral laboratory for passive-scalar mixing and dissipation under shear flows."""

from .diagnostics import NormSeries, fit_log_norm, stagnation_check
from .spectral import SpectralField2D, YSpectrum, mixing_scale, norm_l2, norm_sobolev

__version__ = "0.1.0"

__all__ = [
    "NormSeries",
    "SpectralField2D",
    "YSpectrum",
    "fit_log_norm",
    "mixing_scale",
    "norm_l2",
    "norm_sobolev",
    "stagnation_check",
]
