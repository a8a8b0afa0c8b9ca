import numpy as np
import pytest
from hypothesis import settings

from qdpcw.core import EmissionChannelSplit
from qdpcw.sim.config import DetectionParams, ExperimentConfig

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")

#: (criterion, passed, detail) lines reported by the acceptance suite
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture
def coupled_config():
    """Paper-like coupled dot: Gamma_f = 6.28 ns^-1, beta close to 0.984."""
    return ExperimentConfig.from_splits(
        EmissionChannelSplit(6.182, 0.058, 0.03), gamma_nr_dark=0.03, gamma_bd=0.01,
        gamma_db=0.01, n_pulses=200_000, rng_seed=11)


@pytest.fixture
def simple_config():
    """Single bright level, no spin flips: one exponential of rate 1 ns^-1."""
    return ExperimentConfig.from_splits(
        EmissionChannelSplit(0.8, 0.2, 0.0), n_pulses=100_000, rep_rate=20.0,
        detection=DetectionParams(efficiency=1.0, irf_fwhm=0.0, time_bin=16.0), rng_seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
