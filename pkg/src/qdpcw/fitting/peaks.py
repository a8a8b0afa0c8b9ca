"""Peak detection and Lorentzian line fitting of spectra."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage, optimize, signal
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..types import Spectrum

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PeakFit:
    center: float
    fwhm: float
    amplitude: float
    offset: float
    center_sigma: float

    def to_dict(self) -> dict:
        return {"center": self.center, "fwhm": self.fwhm, "amplitude": self.amplitude,
                "offset": self.offset, "center_sigma": self.center_sigma}

    @classmethod
    def from_dict(cls, doc: dict) -> "PeakFit":
        return cls(**{k: float(doc[k]) for k in
                      ("center", "fwhm", "amplitude", "offset", "center_sigma")})


def lorentzian(x, center, fwhm, amplitude):
    """Lorentzian of peak height ``amplitude`` and full width ``fwhm``."""
    half = 0.5 * fwhm
    return amplitude * half**2 / ((x - center) ** 2 + half**2)


def _multi_lorentzian(params, x, n):
    out = np.full_like(x, params[-1])
    for i in range(n):
        c, w, a = params[3 * i:3 * i + 3]
        out += lorentzian(x, c, w, a)
    return out


def fit_lorentzians(x, y, guesses, offset_guess, weights=None):
    """Least-squares fit of ``len(guesses)`` Lorentzians plus a shared offset.

    ``guesses`` holds ``(center, fwhm, amplitude)`` triples. Returns
    ``(params, covariance, residual)``; the covariance is scaled by the
    reduced chi-square.
    """
    n = len(guesses)
    p0 = np.concatenate([np.ravel(guesses), [offset_guess]])
    wts = np.ones_like(y) if weights is None else weights

    def resid(p):
        return (_multi_lorentzian(p, x, n) - y) * wts

    sol = optimize.least_squares(resid, p0, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                 max_nfev=2000 * p0.size)
    J = sol.jac
    dof = max(y.size - p0.size, 1)
    chi2 = float(np.sum(sol.fun**2))
    try:
        cov = np.linalg.inv(J.T @ J) * (chi2 / dof)
    except np.linalg.LinAlgError:
        cov = np.full((p0.size, p0.size), np.nan)
    return sol.x, cov, sol.fun / wts


def _clusters(indices, x, window):
    groups = []
    for i in indices:
        if groups and x[i] - x[groups[-1][-1]] < window:
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


class PeakFinder(BaseEstimator):
    """Find spectral peaks and fit each with a Lorentzian plus constant offset.

    Parameters
    ----------
    prominence_threshold : float
        A local maximum is kept when it exceeds this multiple of the local
        median intensity.
    window : float
        Half-width (nm) of the fit region around each peak; peaks closer
        than one window are fitted jointly.
    wavelength_filter : (float, float), optional
        Only peaks inside this wavelength range are reported.
    median_span : float, optional
        Full width (nm) of the running median; defaults to ``10 * window``.
    """

    def __init__(self, prominence_threshold=3.0, window=0.2, wavelength_filter=None,
                 median_span=None):
        self.prominence_threshold = prominence_threshold
        self.window = window
        self.wavelength_filter = wavelength_filter
        self.median_span = median_span

    def detect(self, spectrum: Spectrum) -> np.ndarray:
        """Indices of candidate peaks over the whole spectrum (before fitting)."""
        x, y = spectrum.wavelength, spectrum.counts
        if x.size < 3:
            return np.empty(0, dtype=int)
        step = float(np.median(np.diff(x)))
        span = self.median_span if self.median_span is not None else 10 * self.window
        size = max(3, int(round(span / step)) | 1)
        local = ndimage.median_filter(y, size=size, mode="nearest")
        floor = np.maximum(local, np.finfo(float).tiny)
        # prominence above the local median rejects noise spikes riding on a peak
        idx, _ = signal.find_peaks(y, prominence=(self.prominence_threshold - 1.0) * floor)
        return idx[y[idx] > self.prominence_threshold * floor[idx]]

    def _inside_filter(self, x):
        if self.wavelength_filter is None:
            return np.ones_like(np.asarray(x), dtype=bool)
        lo, hi = self.wavelength_filter
        return (np.asarray(x) >= lo) & (np.asarray(x) <= hi)

    def fit(self, spectrum: Spectrum, y=None):
        if not self.window > 0:
            raise ValueError("window must be > 0")
        if self.prominence_threshold < 1:
            raise ValueError("prominence_threshold must be >= 1")
        x, counts = spectrum.wavelength, spectrum.counts
        idx = self.detect(spectrum)
        # neighbours just outside the filter are still fitted so that their
        # tails do not bias the peaks that are reported
        if self.wavelength_filter is not None:
            lo, hi = self.wavelength_filter
            idx = idx[(x[idx] >= lo - 2 * self.window) & (x[idx] <= hi + 2 * self.window)]
        peaks = []
        if idx.size:
            widths = signal.peak_widths(counts, idx, rel_height=0.5)[0]
            step = float(np.median(np.diff(x)))
        for group in _clusters(idx, x, self.window):
            lo = x[group[0]] - self.window
            hi = x[group[-1]] + self.window
            sel = (x >= lo) & (x <= hi)
            xs, ys = x[sel], counts[sel]
            offset = float(np.min(ys))
            guesses = []
            for i in group:
                k = int(np.searchsorted(idx, i))
                guesses.append((x[i], max(widths[k] * step, step), max(counts[i] - offset, 1e-9)))
            if xs.size <= 3 * len(group) + 1:
                log.warning("too few samples to fit peak group near %.4f nm", x[group[0]])
                continue
            try:
                params, cov, _ = fit_lorentzians(xs, ys, guesses, offset,
                                                 1.0 / np.sqrt(np.maximum(ys, 1.0)))
            except (ValueError, RuntimeError) as exc:
                log.warning("peak fit near %.4f nm failed: %s", x[group[0]], exc)
                continue
            for j in range(len(group)):
                c, w, a = params[3 * j:3 * j + 3]
                w = abs(w)
                if not (lo <= c <= hi and w > 0 and a > 0 and np.isfinite(cov[3 * j, 3 * j])):
                    log.warning("discarding implausible peak fit near %.4f nm", x[group[j]])
                    continue
                peaks.append(PeakFit(float(c), float(w), float(a), float(params[-1]),
                                     float(np.sqrt(max(cov[3 * j, 3 * j], 0.0)))))
        peaks = [p for p in peaks if self._inside_filter(p.center)]
        peaks.sort(key=lambda p: p.center)
        self.peaks_ = peaks
        return self

    def predict(self, wavelength):
        """Sum of the fitted Lorentzians (offsets excluded) at ``wavelength``."""
        check_is_fitted(self, "peaks_")
        wavelength = np.asarray(wavelength, dtype=float)
        out = np.zeros_like(wavelength)
        for p in self.peaks_:
            out += lorentzian(wavelength, p.center, p.fwhm, p.amplitude)
        return out


def find_and_fit_peaks(spectrum: Spectrum, prominence_threshold: float = 3.0,
                       window: float = 0.2, wavelength_filter=None) -> list[PeakFit]:
    """Detected peaks with Lorentzian fits, sorted by centre wavelength."""
    return PeakFinder(prominence_threshold, window, wavelength_filter).fit(spectrum).peaks_
