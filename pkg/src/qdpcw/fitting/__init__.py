"""Likelihood and least-squares fitters for decays, spectra and saturation curves."""

from .bootstrap import bootstrap_uncertainty
from .decay import DecayFitter, DecayLikelihood, fit_decay, model_counts
from .peaks import PeakFinder, PeakFit, find_and_fit_peaks, lorentzian
from .result import FitError, FitResult
from .saturation import SaturationFitter, fit_saturation, saturation_curve

__all__ = [
    "bootstrap_uncertainty", "DecayFitter", "DecayLikelihood", "fit_decay", "model_counts",
    "PeakFinder", "PeakFit", "find_and_fit_peaks", "lorentzian", "FitError", "FitResult",
    "SaturationFitter", "fit_saturation", "saturation_curve",
]
