"""Resampling estimates of parameter uncertainties."""

from __future__ import annotations

import numpy as np

from ..types import DecayHistogram
from .result import FitError

_FAILURES = (FitError, ValueError, RuntimeError, np.linalg.LinAlgError)


def _resample(data, rng, sigma):
    counts = data.counts if isinstance(data, DecayHistogram) else np.asarray(data)
    if sigma is None:
        new = rng.poisson(counts)
    else:
        new = counts + rng.normal(0.0, 1.0, counts.shape) * sigma
    return data.with_counts(new) if isinstance(data, DecayHistogram) else new


def bootstrap_uncertainty(fit_fn, data, n_resamples=200, seed=0, sigma=None):
    """Standard deviation of ``fit_fn`` parameters over resampled data.

    ``data`` is a :class:`DecayHistogram` or an array of counts; each
    resample draws every count from a Poisson law with the observed count as
    mean, or from a Gaussian with standard deviation ``sigma`` when given.
    ``fit_fn`` maps resampled data to a parameter vector.
    """
    if n_resamples < 100:
        raise ValueError("n_resamples must be >= 100")
    rng = np.random.default_rng(seed)
    samples, failures = [], 0
    for _ in range(n_resamples):
        try:
            samples.append(np.atleast_1d(np.asarray(fit_fn(_resample(data, rng, sigma)),
                                                    dtype=float)))
        except _FAILURES:
            failures += 1
    if failures > 0.2 * n_resamples:
        raise FitError(f"{failures} of {n_resamples} bootstrap fits failed")
    return np.std(np.vstack(samples), axis=0, ddof=1)
