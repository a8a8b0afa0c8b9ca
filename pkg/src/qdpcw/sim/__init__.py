"""Seeded Monte Carlo forward models of the single-photon source."""

from .config import (BlinkParams, DetectionParams, DispersionTable, ExperimentConfig,
                     FabryPerotSceneConfig, WaveguideSection)
from .ctmc import PhotonRecords, simulate_pulse_train, iter_pulse_blocks, telegraph_states
from .fabry_perot import cavity_path, resonances, synthesize_fp_spectrum
from .histograms import build_coincidence_histogram, build_decay_histogram, correlate

__all__ = [
    "BlinkParams", "DetectionParams", "DispersionTable", "ExperimentConfig",
    "FabryPerotSceneConfig", "WaveguideSection", "PhotonRecords", "simulate_pulse_train",
    "iter_pulse_blocks", "telegraph_states", "cavity_path", "resonances",
    "synthesize_fp_spectrum", "build_coincidence_histogram", "build_decay_histogram",
    "correlate",
]
