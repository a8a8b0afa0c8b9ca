"""Second-order correlation at zero delay from pulsed coincidence histograms."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .._validation import check_positive
from ..types import CoincidenceHistogram

log = logging.getLogger(__name__)

MIN_SIDE_PEAKS = 20


def peak_areas(coinc: CoincidenceHistogram, rep_period: float):
    """Delays ``k * T`` and summed counts of every peak fully inside the window.

    Each peak integrates the bins whose centres fall in ``[kT - T/2, kT + T/2)``.
    """
    T = check_positive(rep_period, "rep_period")
    K = int(np.floor((coinc.window - 0.5 * T) / T + 1e-9))
    k = np.arange(-K, K + 1)
    centers = coinc.centers
    idx = np.floor((centers + 0.5 * T) / T).astype(np.int64)
    areas = np.zeros(k.size)
    keep = np.abs(idx) <= K
    np.add.at(areas, idx[keep] + K, coinc.counts[keep])
    return k * T, areas


class BunchingEnvelope(BaseEstimator):
    """Side-peak envelope ``A exp(-|tau| / tau_b) + C``.

    Fitted by Poisson-weighted least squares on the side-peak areas; the
    ``A`` term captures bunching from blinking and ``C`` the uncorrelated
    coincidence level.
    """

    def __init__(self, tau_b_bounds=None):
        self.tau_b_bounds = tau_b_bounds

    def fit(self, delay, area):
        tau = np.abs(np.asarray(delay, dtype=float))
        area = np.asarray(area, dtype=float)
        if tau.size < 3:
            raise ValueError("need at least three side peaks")
        lo, hi = self.tau_b_bounds or (0.25 * tau.min(), 0.5 * tau.max())
        order = np.argsort(tau)
        far = area[order][-max(1, tau.size // 4):]
        near = area[order][:2]
        c0 = float(np.mean(far))
        a0 = max(float(np.mean(near)) - c0, 0.0)
        # start from the e-folding delay implied by the near/far contrast
        t0 = float(np.clip(tau.max() / 5.0, lo, hi))
        weights = 1.0 / np.sqrt(np.maximum(area, 1.0))

        def resid(p):
            return (p[0] * np.exp(-tau / p[1]) + p[2] - area) * weights

        scale = max(float(area.max()), 1.0)
        sol = optimize.least_squares(resid, [a0, t0, c0], bounds=([0.0, lo, 0.0], [np.inf, hi, np.inf]),
                                     x_scale=[scale, t0, scale], xtol=1e-12, ftol=1e-12)
        if not sol.success or not np.all(np.isfinite(sol.x)):
            raise RuntimeError(f"envelope fit failed: {sol.message}")
        self.amplitude_, self.tau_b_, self.offset_ = (float(v) for v in sol.x)
        self.cost_ = float(2.0 * sol.cost)
        return self

    def predict(self, delay):
        check_is_fitted(self, "offset_")
        tau = np.abs(np.asarray(delay, dtype=float))
        return self.amplitude_ * np.exp(-tau / self.tau_b_) + self.offset_


@dataclass(frozen=True)
class G2Result:
    g2_zero: float
    g2_sigma: float
    central_area: float
    neighbor_area_fit: float
    excitation_efficiency: float
    envelope: dict
    degraded: bool = False
    peak_delays: np.ndarray = field(default=None, compare=False, repr=False)
    peak_areas: np.ndarray = field(default=None, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {"g2_zero": self.g2_zero, "g2_sigma": self.g2_sigma,
                "central_area": self.central_area, "neighbor_area_fit": self.neighbor_area_fit,
                "excitation_efficiency": self.excitation_efficiency,
                "envelope": dict(self.envelope), "degraded": self.degraded,
                "peak_delays": None if self.peak_delays is None else self.peak_delays.tolist(),
                "peak_areas": None if self.peak_areas is None else self.peak_areas.tolist()}


def extract_g2(coinc: CoincidenceHistogram, rep_period: float) -> G2Result:
    """``g2(0)`` as the central-peak area over the bunching envelope at ``|tau| = T``.

    The envelope fitted to the side peaks extrapolates the uncorrelated
    level to the first side peak, which removes the bunching caused by
    blinking. If the envelope fit fails the mean of the two first side
    peaks is used instead and the result is flagged as degraded.
    """
    T = check_positive(rep_period, "rep_period")
    delays, areas = peak_areas(coinc, T)
    K = delays.size // 2
    if 2 * K < MIN_SIDE_PEAKS:
        raise ValueError(
            f"window of {coinc.window:g} ns holds {2 * K} side peaks; at least "
            f"{MIN_SIDE_PEAKS} are needed (window >= {(MIN_SIDE_PEAKS // 2 + 0.5) * T:g} ns)")
    central = float(areas[K])
    side = np.ones(delays.size, dtype=bool)
    side[K] = False
    degraded = False
    try:
        env = BunchingEnvelope().fit(delays[side], areas[side])
        reference = float(env.predict(T))
        A, tau_b, C = env.amplitude_, env.tau_b_, env.offset_
        if not reference > 0:
            raise RuntimeError("envelope vanishes at the first side peak")
    except (RuntimeError, ValueError) as exc:
        log.warning("bunching envelope fit failed (%s); using the first side peaks", exc)
        degraded = True
        reference = float(0.5 * (areas[K - 1] + areas[K + 1]))
        A, tau_b, C = float("nan"), float("nan"), float("nan")
    if not reference > 0:
        raise ValueError("no coincidences in the first side peaks")
    g2 = central / reference
    # Poisson error of the central area; the envelope is pinned by many peaks
    g2_sigma = np.sqrt(max(central, 1.0)) / reference
    total = A + C
    eff = C / total if (not degraded and total > 0) else float("nan")
    if not eff > 0:
        # an envelope without an uncorrelated floor carries no duty-cycle information
        eff = float("nan")
    return G2Result(float(g2), float(g2_sigma), central, reference, float(eff),
                    {"amplitude": A, "tau_b": tau_b, "offset": C}, degraded, delays, areas)


def g2_from_purity(purity: float) -> float:
    """``g2(0)`` of a source whose detected photons are a fraction ``purity`` single-emitter."""
    rho = float(purity)
    if not 0.0 <= rho <= 1.0:
        raise ValueError("purity must lie in [0, 1]")
    return 1.0 - rho**2


def background_for_purity(signal_rate: float, purity: float) -> float:
    """Uncorrelated background rate that yields the requested signal purity."""
    rho = float(purity)
    if not 0.0 < rho <= 1.0:
        raise ValueError("purity must lie in (0, 1]")
    return check_positive(signal_rate, "signal_rate") * (1.0 - rho) / rho
