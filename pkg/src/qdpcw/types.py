"""Binned measurement records: decay and coincidence histograms, spectra."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_counts, check_increasing, check_uniform_edges


@dataclass(frozen=True, eq=False)
class DecayHistogram:
    """Photon arrival times folded into one repetition period (ns)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    rep_period: float
    total_pulses: int = 0

    def __post_init__(self):
        edges = check_uniform_edges(self.bin_edges)
        counts = check_counts(self.counts)
        if counts.size != edges.size - 1:
            raise ValueError("counts must have one entry per bin")
        if not self.rep_period > 0:
            raise ValueError("rep_period must be > 0")
        if edges[-1] - edges[0] > self.rep_period * (1 + 1e-9):
            raise ValueError("histogram span exceeds the repetition period")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "rep_period", float(self.rep_period))
        object.__setattr__(self, "total_pulses", int(self.total_pulses))

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def with_counts(self, counts) -> "DecayHistogram":
        return DecayHistogram(self.bin_edges, counts, self.rep_period, self.total_pulses)

    def __add__(self, other: "DecayHistogram") -> "DecayHistogram":
        if not np.array_equal(self.bin_edges, other.bin_edges) or self.rep_period != other.rep_period:
            raise ValueError("histograms have different binning")
        return DecayHistogram(self.bin_edges, self.counts + other.counts, self.rep_period,
                              self.total_pulses + other.total_pulses)

    def __eq__(self, other):
        return (isinstance(other, DecayHistogram)
                and np.array_equal(self.bin_edges, other.bin_edges)
                and np.array_equal(self.counts, other.counts)
                and self.rep_period == other.rep_period
                and self.total_pulses == other.total_pulses)


@dataclass(frozen=True, eq=False)
class CoincidenceHistogram:
    """Start-stop delay counts over the symmetric window ``[-W, W]`` (ns)."""

    bin_edges: np.ndarray
    counts: np.ndarray
    rep_period: float

    def __post_init__(self):
        edges = check_uniform_edges(self.bin_edges)
        counts = check_counts(self.counts)
        if counts.size != edges.size - 1:
            raise ValueError("counts must have one entry per bin")
        if not np.isclose(edges[0], -edges[-1], rtol=1e-9, atol=1e-9):
            raise ValueError("coincidence window must be symmetric about zero")
        if not self.rep_period > 0:
            raise ValueError("rep_period must be > 0")
        object.__setattr__(self, "bin_edges", edges)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "rep_period", float(self.rep_period))

    @property
    def window(self) -> float:
        return float(self.bin_edges[-1])

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])

    def __add__(self, other: "CoincidenceHistogram") -> "CoincidenceHistogram":
        if not np.array_equal(self.bin_edges, other.bin_edges):
            raise ValueError("histograms have different binning")
        return CoincidenceHistogram(self.bin_edges, self.counts + other.counts, self.rep_period)

    def __eq__(self, other):
        return (isinstance(other, CoincidenceHistogram)
                and np.array_equal(self.bin_edges, other.bin_edges)
                and np.array_equal(self.counts, other.counts)
                and self.rep_period == other.rep_period)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Intensity sampled on a strictly increasing wavelength grid (nm)."""

    wavelength: np.ndarray
    counts: np.ndarray

    def __post_init__(self):
        wl = check_increasing(self.wavelength, "wavelength")
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != wl.shape:
            raise ValueError("counts and wavelength must have the same length")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "counts", counts)

    def __len__(self):
        return self.wavelength.size

    def __eq__(self, other):
        return (isinstance(other, Spectrum)
                and np.array_equal(self.wavelength, other.wavelength)
                and np.array_equal(self.counts, other.counts))
