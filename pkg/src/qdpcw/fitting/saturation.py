"""Saturation curve ``I(P) = I_inf * (1 - exp(-P / P_sat))``."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .result import FitError


def saturation_curve(power, p_sat, i_inf):
    return i_inf * -np.expm1(-np.asarray(power, dtype=float) / p_sat)


class SaturationFitter(BaseEstimator):
    """Least-squares fit of a pulsed-excitation saturation curve.

    Parameters
    ----------
    sigma : array-like, optional
        Per-point intensity uncertainties; without them the covariance is
        scaled by the residual variance.
    """

    def __init__(self, sigma=None):
        self.sigma = sigma

    def fit(self, powers, intensities):
        P = np.asarray(powers, dtype=float)
        intensity = np.asarray(intensities, dtype=float)
        if P.shape != intensity.shape or P.ndim != 1:
            raise ValueError("powers and intensities must be 1-d arrays of equal length")
        if P.size < 4:
            raise ValueError("need at least 4 power points")
        if np.any(P < 0) or not np.all(np.isfinite(intensity)):
            raise ValueError("powers must be >= 0 and intensities finite")
        order = np.argsort(P)
        P, intensity = P[order], intensity[order]
        p0 = (float(np.median(P)), float(intensity.max()))
        sigma = None if self.sigma is None else np.asarray(self.sigma, dtype=float)[order]
        try:
            popt, pcov = optimize.curve_fit(
                saturation_curve, P, intensity, p0=p0, sigma=sigma,
                absolute_sigma=sigma is not None, bounds=([1e-300, -np.inf], [np.inf, np.inf]),
                xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=10000)
        except (RuntimeError, ValueError) as exc:
            raise FitError(f"saturation fit failed: {exc}") from exc
        if not np.all(np.isfinite(pcov)):
            raise FitError("saturation fit is singular; powers do not constrain P_sat")
        resid = intensity - saturation_curve(P, *popt)
        scale = sigma if sigma is not None else np.full(P.size, resid.std(ddof=2) if P.size > 2 else 0)
        drops = intensity[:-1] - intensity[1:]
        noise = np.maximum(scale[:-1], scale[1:]) * 3.0
        if np.any(drops > noise + 1e-12 * np.abs(intensity).max()):
            warnings.warn("intensity decreases with power beyond the noise level", stacklevel=2)
        self.p_sat_, self.i_inf_ = float(popt[0]), float(popt[1])
        self.covariance_ = pcov
        self.sigmas_ = np.sqrt(np.clip(np.diag(pcov), 0, None))
        return self

    def predict(self, power):
        check_is_fitted(self, "p_sat_")
        return saturation_curve(power, self.p_sat_, self.i_inf_)

    def power_ratio(self, power):
        """Express ``power`` in units of the fitted saturation power."""
        check_is_fitted(self, "p_sat_")
        return np.asarray(power, dtype=float) / self.p_sat_


def fit_saturation(powers, intensities, sigma=None):
    """Returns ``(p_sat, i_inf, (sigma_p_sat, sigma_i_inf))``."""
    f = SaturationFitter(sigma).fit(powers, intensities)
    return f.p_sat_, f.i_inf_, tuple(f.sigmas_)
