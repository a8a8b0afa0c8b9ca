"""Detection chain: TCSPC decay histograms and HBT coincidence histograms."""

from __future__ import annotations

import numpy as np

from ..types import CoincidenceHistogram, DecayHistogram
from .config import ExperimentConfig
from .ctmc import STREAM_COINCIDENCE, STREAM_DECAY_HIST, PhotonRecords, substream

_PAIR_CHUNK = 20_000_000


def build_decay_histogram(photons: PhotonRecords, cfg: ExperimentConfig,
                          time_bin: float | None = None) -> DecayHistogram:
    """Fold detected guided-mode photons into one repetition period.

    Photons are thinned by the detection efficiency, jittered by a Gaussian
    IRF, wrapped modulo the repetition period, and joined by uniform
    background counts. ``time_bin`` is in ps (defaults to the config's).
    """
    time_bin = cfg.detection.time_bin if time_bin is None else time_bin
    if not time_bin > 0:
        raise ValueError("time bin must be > 0")
    width = time_bin * 1e-3
    period = cfg.rep_period
    n_bins = int(np.floor(period / width * (1 + 1e-12)))
    if n_bins < 1:
        raise ValueError("time bin is longer than the repetition period")
    edges = np.arange(n_bins + 1) * width

    rng = substream(cfg.rng_seed, STREAM_DECAY_HIST)
    times = photons.waveguide.time
    times = times[rng.random(times.size) < cfg.detection.efficiency]
    sigma = cfg.detection.irf_sigma_ns
    if sigma > 0:
        times = times + rng.normal(0.0, sigma, times.size)
    folded = np.mod(times, period)
    n_bg = rng.poisson(cfg.background_rate * cfg.duration * 1e-9)
    folded = np.concatenate([folded, rng.random(n_bg) * period])

    idx = np.floor(folded / width).astype(np.int64)
    idx = idx[(idx >= 0) & (idx < n_bins)]
    counts = np.bincount(idx, minlength=n_bins)
    return DecayHistogram(edges, counts, period, cfg.n_pulses)


def detector_streams(photons: PhotonRecords, cfg: ExperimentConfig, rng=None):
    """Split detected guided photons over two detectors and add background.

    Returns two sorted arrays of detection times (ns).
    """
    rng = substream(cfg.rng_seed, STREAM_COINCIDENCE) if rng is None else rng
    times = photons.waveguide.time
    times = times[rng.random(times.size) < cfg.detection.efficiency]
    first = rng.random(times.size) < 0.5
    sigma = cfg.detection.irf_sigma_ns
    streams = []
    for mask in (first, ~first):
        t = times[mask]
        if sigma > 0:
            t = t + rng.normal(0.0, sigma, t.size)
        n_bg = rng.poisson(cfg.background_rate * cfg.duration * 1e-9)
        t = np.concatenate([t, rng.random(n_bg) * cfg.duration])
        streams.append(np.sort(t))
    return streams


def correlate(starts: np.ndarray, stops: np.ndarray, window: float, bin_width: float):
    """Histogram all ``stop - start`` delays in ``[-window, window]``.

    Both inputs must be sorted. Returns ``(edges, counts)``.
    """
    n_bins = max(1, int(round(2 * window / bin_width)))
    edges = np.linspace(-window, window, n_bins + 1)
    width = 2 * window / n_bins
    counts = np.zeros(n_bins, dtype=np.int64)
    if starts.size == 0 or stops.size == 0:
        return edges, counts
    lo = np.searchsorted(stops, starts - window, side="left")
    hi = np.searchsorted(stops, starts + window, side="right")
    n_pairs = hi - lo
    cum = np.cumsum(n_pairs)
    begin = 0
    while begin < starts.size:
        offset = cum[begin - 1] if begin else 0
        end = int(np.searchsorted(cum, offset + _PAIR_CHUNK, side="right"))
        end = max(end, begin + 1)
        k = n_pairs[begin:end]
        total = int(k.sum())
        if total:
            run_start = np.repeat(np.cumsum(k) - k, k)
            stop_idx = np.repeat(lo[begin:end], k) + (np.arange(total) - run_start)
            delay = stops[stop_idx] - np.repeat(starts[begin:end], k)
            idx = np.floor((delay + window) / width).astype(np.int64)
            idx[idx == n_bins] = n_bins - 1
            counts += np.bincount(idx, minlength=n_bins)
        begin = end
    return edges, counts


def build_coincidence_histogram(photons: PhotonRecords, cfg: ExperimentConfig, window: float,
                                bin_width: float = 0.1) -> CoincidenceHistogram:
    """Hanbury Brown-Twiss start-stop histogram over ``[-window, window]`` ns."""
    if window < cfg.rep_period:
        raise ValueError(
            f"window {window} ns must cover at least one repetition period ({cfg.rep_period} ns)")
    if not bin_width > 0:
        raise ValueError("bin width must be > 0")
    starts, stops = detector_streams(photons, cfg)
    edges, counts = correlate(starts, stops, window, bin_width)
    return CoincidenceHistogram(edges, counts, cfg.rep_period)
