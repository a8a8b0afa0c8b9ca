"""Synthetic Fabry-Perot spectra of multi-section dispersive waveguides."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..types import Spectrum
from .config import FabryPerotSceneConfig

_OVERSAMPLE = 8


@dataclass(frozen=True, eq=False)
class ResonanceTruth:
    """Exact resonance wavelengths, widths and cavity path lengths (nm)."""

    center: np.ndarray
    fwhm: np.ndarray
    optical_path: np.ndarray


def cavity_path(scene: FabryPerotSceneConfig, excite_section: int, wavelength):
    """Optical path length (nm) and mean end reflectivity of the cavity at each wavelength.

    The cavity is the run of guiding sections around the excited one; a
    section that stops guiding reflects fully. Wavelengths at which the
    excited section itself does not guide get zero path length.
    """
    wl = np.atleast_1d(np.asarray(wavelength, dtype=float))
    sections = scene.sections
    guides = np.array([s.dispersion.guides(wl) for s in sections])
    inside = np.zeros_like(guides)
    inside[excite_section] = guides[excite_section]
    for i in range(excite_section - 1, -1, -1):
        inside[i] = inside[i + 1] & guides[i]
    for i in range(excite_section + 1, len(sections)):
        inside[i] = inside[i - 1] & guides[i]
    path = np.zeros_like(wl)
    for i, s in enumerate(sections):
        path += np.where(inside[i], s.dispersion(wl) * s.length * 1e3, 0.0)
    r_first, r_last = scene.mirror_reflectivities
    refl = np.sqrt(np.where(inside[0], r_first, 1.0) * np.where(inside[-1], r_last, 1.0))
    return path, refl


def resonances(scene: FabryPerotSceneConfig, excite_section: int) -> ResonanceTruth:
    """Resonance wavelengths where the round-trip phase is a multiple of ``2 pi``.

    The round-trip phase grows with wavenumber ``1/lambda`` at the rate
    ``2 pi * 2 L`` with ``L`` the group-index path, so the local free
    spectral range is ``lambda^2 / (2 L)``.
    """
    if not 0 <= excite_section < len(scene.sections):
        raise IndexError(f"no section {excite_section}")
    grid = scene.wavelength_grid
    fine = np.linspace(grid[0], grid[-1], (grid.size - 1) * _OVERSAMPLE + 1)
    path, _ = cavity_path(scene, excite_section, fine)
    wavenumber = 1.0 / fine
    # round trips counted from the red end of the grid; decreases with wavelength
    steps = 0.5 * (2 * path[1:] + 2 * path[:-1]) * (wavenumber[:-1] - wavenumber[1:])
    order = np.concatenate([np.cumsum(steps[::-1])[::-1], [0.0]])
    active = path > 0
    change = np.flatnonzero(np.diff(active.astype(np.int8)))
    bounds = np.concatenate([[0], change + 1, [fine.size]])
    centers = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        if not active[a] or b - a < 2:
            continue
        m = order[a:b][::-1]
        lam = fine[a:b][::-1]
        targets = np.arange(np.ceil(m[0] - 0.5), np.floor(m[-1] - 0.5) + 1) + 0.5
        targets = targets[(targets > m[0]) & (targets < m[-1])]
        centers.append(np.interp(targets, m, lam))
    if not centers:
        return ResonanceTruth(np.empty(0), np.empty(0), np.empty(0))
    lam = np.sort(np.concatenate(centers))
    L, R = cavity_path(scene, excite_section, lam)
    fsr = lam**2 / (2.0 * L)
    with np.errstate(divide="ignore", invalid="ignore"):
        finesse_width = np.where(R < 1, fsr * (1 - R) / (np.pi * np.sqrt(R)), 0.0)
    return ResonanceTruth(lam, np.maximum(scene.linewidth_floor, finesse_width), L)


def synthesize_fp_spectrum(scene: FabryPerotSceneConfig, excite_section: int,
                           return_truth: bool = False):
    """Poisson-noisy spectrum of Lorentzian Fabry-Perot resonances.

    Returns a :class:`~qdpcw.types.Spectrum`, or ``(spectrum, truth)`` when
    ``return_truth`` is set.
    """
    truth = resonances(scene, excite_section)
    wl = scene.wavelength_grid
    expected = np.full(wl.size, float(scene.baseline_counts))
    for c, w in zip(truth.center, truth.fwhm):
        half = 0.5 * w
        expected += scene.peak_counts * half**2 / ((wl - c) ** 2 + half**2)
    rng = np.random.default_rng(scene.noise_seed)
    spectrum = Spectrum(wl.copy(), rng.poisson(expected).astype(float))
    return (spectrum, truth) if return_truth else spectrum
