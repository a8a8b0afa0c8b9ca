"""Experiment and Fabry-Perot scene configurations with JSON round trip."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .._validation import (check_finite_nonnegative, check_increasing, check_positive,
                           check_probability)
from ..core import (DEFAULT_INITIAL_BRIGHT, DEFAULT_INITIAL_DARK, EmissionChannelSplit, RateSet,
                    composite_rates)


@dataclass(frozen=True)
class BlinkParams:
    """Telegraph blinking rates in us^-1 (``k_off``: ON->OFF, ``k_on``: OFF->ON)."""

    k_off: float = 0.0
    k_on: float = 1.0

    def __post_init__(self):
        check_finite_nonnegative(self.k_off, "blink.k_off")
        check_finite_nonnegative(self.k_on, "blink.k_on")
        if self.k_off > 0 and self.k_on == 0:
            raise ValueError("blink.k_on must be > 0 when k_off > 0 (emitter would stay dark)")

    @property
    def duty_cycle(self) -> float:
        """Stationary probability of the ON state."""
        if self.k_off == 0:
            return 1.0
        return self.k_on / (self.k_on + self.k_off)

    @property
    def correlation_time(self) -> float:
        """ON/OFF correlation time in ns."""
        total = self.k_on + self.k_off
        return math.inf if total == 0 else 1e3 / total


@dataclass(frozen=True)
class DetectionParams:
    efficiency: float = 1.0
    irf_fwhm: float = 100.0  # ps
    time_bin: float = 16.0  # ps

    def __post_init__(self):
        check_probability(self.efficiency, "detection.efficiency")
        check_finite_nonnegative(self.irf_fwhm, "detection.irf_fwhm")
        check_positive(self.time_bin, "detection.time_bin")

    @property
    def irf_sigma_ns(self) -> float:
        return self.irf_fwhm * 1e-3 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


@dataclass(frozen=True)
class ExperimentConfig:
    """Pulsed excitation of a single dot feeding a waveguide and a detector."""

    rates: RateSet
    split_x: EmissionChannelSplit
    split_y: EmissionChannelSplit
    rep_rate: float = 76.0  # MHz
    n_pulses: int = 1_000_000
    excitation_power_ratio: float = 0.63
    blink: BlinkParams = field(default_factory=BlinkParams)
    detection: DetectionParams = field(default_factory=DetectionParams)
    background_rate: float = 0.0  # counts/s per detector
    rng_seed: int = 0
    initial_bright: float = DEFAULT_INITIAL_BRIGHT
    initial_dark: float = DEFAULT_INITIAL_DARK

    def __post_init__(self):
        check_positive(self.rep_rate, "rep_rate")
        if int(self.n_pulses) != self.n_pulses or self.n_pulses < 0:
            raise ValueError("n_pulses must be a non-negative integer")
        check_finite_nonnegative(self.excitation_power_ratio, "excitation_power_ratio")
        check_finite_nonnegative(self.background_rate, "background_rate")
        if int(self.rng_seed) != self.rng_seed or not 0 <= self.rng_seed < 2**64:
            raise ValueError("rng_seed must be an unsigned 64-bit integer")
        check_probability(self.initial_bright, "initial_bright")
        check_probability(self.initial_dark, "initial_dark")
        if self.initial_bright + self.initial_dark > 0.5 + 1e-12:
            raise ValueError("per-branch initial populations must sum to <= 0.5")
        for axis, split in (("X", self.split_x), ("Y", self.split_y)):
            radiative = split.gamma_wg + split.gamma_rad
            if not math.isclose(radiative, self.rates.radiative(axis), rel_tol=1e-9, abs_tol=1e-12):
                raise ValueError(
                    f"split_{axis.lower()} wg+rad = {radiative} does not match "
                    f"gamma_rad_bright_{axis.lower()} = {self.rates.radiative(axis)}")
            if not math.isclose(split.gamma_nr, self.rates.gamma_nr_bright, rel_tol=1e-9,
                                abs_tol=1e-12):
                raise ValueError(f"split_{axis.lower()}.gamma_nr must equal gamma_nr_bright")
        object.__setattr__(self, "n_pulses", int(self.n_pulses))
        object.__setattr__(self, "rng_seed", int(self.rng_seed))
        gf_x, gf_y, _ = composite_rates(self.rates)
        slowest = min((g for g in (gf_x, gf_y) if g > 0), default=None)
        if slowest is not None and self.rep_period < 3.0 / slowest:
            warnings.warn(
                f"repetition period {self.rep_period:.3g} ns is shorter than three bright "
                f"lifetimes ({1 / slowest:.3g} ns); decay histograms will wrap heavily",
                stacklevel=3)

    @classmethod
    def from_splits(cls, split_x: EmissionChannelSplit, split_y: EmissionChannelSplit | None = None,
                    gamma_nr_dark: float = 0.0, gamma_bd: float = 0.0, gamma_db: float = 0.0,
                    **kwargs) -> "ExperimentConfig":
        split_y = split_x if split_y is None else split_y
        rates = RateSet.from_splits(split_x, split_y, gamma_nr_dark, gamma_bd, gamma_db)
        return cls(rates=rates, split_x=split_x, split_y=split_y, **kwargs)

    @property
    def rep_period(self) -> float:
        """Pulse spacing in ns."""
        return 1e3 / self.rep_rate

    @property
    def excitation_probability(self) -> float:
        return -math.expm1(-self.excitation_power_ratio)

    @property
    def duration(self) -> float:
        """Total acquisition time in ns."""
        return self.n_pulses * self.rep_period

    def replace(self, **changes) -> "ExperimentConfig":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return {
            "kind": "experiment",
            "rep_rate": self.rep_rate,
            "n_pulses": self.n_pulses,
            "excitation_power_ratio": self.excitation_power_ratio,
            "rates": self.rates.to_dict(),
            "split_x": self.split_x.to_dict(),
            "split_y": self.split_y.to_dict(),
            "blink": {"k_off": self.blink.k_off, "k_on": self.blink.k_on},
            "detection": {"efficiency": self.detection.efficiency,
                          "irf_fwhm": self.detection.irf_fwhm,
                          "time_bin": self.detection.time_bin},
            "background_rate": self.background_rate,
            "rng_seed": self.rng_seed,
            "initial_bright": self.initial_bright,
            "initial_dark": self.initial_dark,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        doc.pop("kind", None)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment config fields: {sorted(unknown)}")
        for key in ("rates", "split_x", "split_y"):
            if key not in doc:
                raise ValueError(f"experiment config is missing {key!r}")
        doc["rates"] = RateSet(**doc["rates"])
        doc["split_x"] = EmissionChannelSplit(**doc["split_x"])
        doc["split_y"] = EmissionChannelSplit(**doc["split_y"])
        if "blink" in doc:
            doc["blink"] = BlinkParams(**doc["blink"])
        if "detection" in doc:
            doc["detection"] = DetectionParams(**doc["detection"])
        return cls(**doc)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class DispersionTable:
    """Group index sampled over the band in which a section guides light.

    Outside ``[wavelength[0], wavelength[-1]]`` the section does not guide
    and its interfaces act as mirrors.
    """

    wavelength: np.ndarray
    n_g: np.ndarray

    def __post_init__(self):
        wl = check_increasing(self.wavelength, "dispersion wavelength")
        ng = np.asarray(self.n_g, dtype=float)
        if ng.shape != wl.shape or wl.size < 2:
            raise ValueError("dispersion table needs >= 2 matching samples")
        if np.any(ng < 1):
            raise ValueError("group index must be >= 1")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "n_g", ng)

    def guides(self, wavelength):
        wavelength = np.asarray(wavelength, dtype=float)
        return (wavelength >= self.wavelength[0]) & (wavelength <= self.wavelength[-1])

    def __call__(self, wavelength):
        return np.interp(wavelength, self.wavelength, self.n_g)


@dataclass(frozen=True)
class WaveguideSection:
    length: float  # um
    dispersion: DispersionTable

    def __post_init__(self):
        check_positive(self.length, "section length")


@dataclass(frozen=True, eq=False)
class FabryPerotSceneConfig:
    """A chain of waveguide sections closed by two end mirrors.

    ``mirror_reflectivities`` are the power reflectivities at the two ends
    of the chain; internal interfaces reflect only where the neighbouring
    section stops guiding.
    """

    sections: tuple
    mirror_reflectivities: tuple = (0.9, 0.9)
    wavelength_grid: np.ndarray = field(default_factory=lambda: np.arange(900.0, 960.0, 0.005))
    linewidth_floor: float = 0.02  # nm
    noise_seed: int = 0
    peak_counts: float = 2000.0
    baseline_counts: float = 20.0

    def __post_init__(self):
        if len(self.sections) == 0:
            raise ValueError("a scene needs at least one section")
        object.__setattr__(self, "sections", tuple(self.sections))
        refl = tuple(float(r) for r in self.mirror_reflectivities)
        if len(refl) != 2 or not all(0 < r <= 1 for r in refl):
            raise ValueError("mirror reflectivities must be two values in (0, 1]")
        object.__setattr__(self, "mirror_reflectivities", refl)
        object.__setattr__(self, "wavelength_grid",
                           check_increasing(self.wavelength_grid, "wavelength_grid"))
        check_finite_nonnegative(self.linewidth_floor, "linewidth_floor")
        check_finite_nonnegative(self.peak_counts, "peak_counts")
        check_finite_nonnegative(self.baseline_counts, "baseline_counts")

    def to_dict(self) -> dict:
        return {
            "kind": "fabry_perot",
            "sections": [{"length": s.length,
                          "dispersion": {"wavelength": s.dispersion.wavelength.tolist(),
                                         "n_g": s.dispersion.n_g.tolist()}}
                         for s in self.sections],
            "mirror_reflectivities": list(self.mirror_reflectivities),
            "wavelength_grid": self.wavelength_grid.tolist(),
            "linewidth_floor": self.linewidth_floor,
            "noise_seed": self.noise_seed,
            "peak_counts": self.peak_counts,
            "baseline_counts": self.baseline_counts,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FabryPerotSceneConfig":
        doc = dict(doc)
        doc.pop("kind", None)
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown scene fields: {sorted(unknown)}")
        doc["sections"] = tuple(
            WaveguideSection(s["length"], DispersionTable(s["dispersion"]["wavelength"],
                                                          s["dispersion"]["n_g"]))
            for s in doc["sections"])
        if "wavelength_grid" in doc:
            grid = doc["wavelength_grid"]
            if isinstance(grid, dict):
                grid = np.arange(grid["start"], grid["stop"], grid["step"])
            doc["wavelength_grid"] = np.asarray(grid, dtype=float)
        return cls(**doc)
