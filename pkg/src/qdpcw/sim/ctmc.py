"""Exact continuous-time Markov simulation of pulsed single-dot emission.

Each pulse is simulated independently: the dot is assumed to have relaxed
to the ground state before the next pulse arrives. Blinking is a two-state
telegraph process sampled at pulse boundaries.

Randomness is drawn from substreams keyed by ``(seed, stream, block)`` so
that results do not depend on how blocks are distributed over workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..core import composite_rates
from .config import ExperimentConfig

#: Pulses per RNG block. Changing this changes every simulated result.
BLOCK_SIZE = 1 << 18

STREAM_BLINK = 0
STREAM_PULSES = 1
STREAM_DECAY_HIST = 2
STREAM_COINCIDENCE = 3

WAVEGUIDE = 0
RADIATION = 1

_MAX_JUMPS = 100_000


def substream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


@dataclass(frozen=True, eq=False)
class PhotonRecords:
    """Emitted photons: absolute time (ns), channel, exciton axis and pulse index."""

    time: np.ndarray
    channel: np.ndarray
    exciton: np.ndarray
    pulse: np.ndarray

    def __len__(self):
        return self.time.size

    @classmethod
    def empty(cls) -> "PhotonRecords":
        return cls(np.empty(0), np.empty(0, np.int8), np.empty(0, np.int8), np.empty(0, np.int64))

    @classmethod
    def concatenate(cls, parts) -> "PhotonRecords":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("time", "channel", "exciton", "pulse")))

    def select(self, mask) -> "PhotonRecords":
        return PhotonRecords(self.time[mask], self.channel[mask], self.exciton[mask],
                             self.pulse[mask])

    @property
    def waveguide(self) -> "PhotonRecords":
        return self.select(self.channel == WAVEGUIDE)

    def __eq__(self, other):
        return isinstance(other, PhotonRecords) and all(
            np.array_equal(getattr(self, f), getattr(other, f))
            for f in ("time", "channel", "exciton", "pulse"))


def telegraph_states(cfg: ExperimentConfig) -> np.ndarray:
    """ON/OFF blinking state for every pulse of the run.

    The per-period switching probabilities are those of the continuous
    two-state process observed at pulse times, so the state correlation
    decays exactly as ``exp(-(k_on + k_off) * tau)``.
    """
    n = cfg.n_pulses
    k_on, k_off = cfg.blink.k_on, cfg.blink.k_off
    if k_off == 0 or n == 0:
        return np.ones(n, dtype=bool)
    rng = substream(cfg.rng_seed, STREAM_BLINK)
    total = k_on + k_off
    mix = -math.expm1(-total * cfg.rep_period * 1e-3)
    p_leave_on = k_off / total * mix
    p_leave_off = k_on / total * mix
    first_on = rng.random() < k_on / total

    states = np.empty(n, dtype=bool)
    filled = 0
    current = first_on
    mean_cycle = 1.0 / p_leave_on + 1.0 / p_leave_off
    while filled < n:
        n_pairs = int((n - filled) / mean_cycle * 1.2) + 16
        first = rng.geometric(p_leave_on if current else p_leave_off, n_pairs)
        second = rng.geometric(p_leave_off if current else p_leave_on, n_pairs)
        runs = np.empty(2 * n_pairs, dtype=np.int64)
        runs[0::2], runs[1::2] = first, second
        values = np.empty(2 * n_pairs, dtype=bool)
        values[0::2], values[1::2] = current, not current
        seq = np.repeat(values, runs)
        take = min(seq.size, n - filled)
        states[filled:filled + take] = seq[:take]
        filled += take
    return states


def _simulate_block(cfg: ExperimentConfig, block: int, on: np.ndarray) -> PhotonRecords:
    rng = substream(cfg.rng_seed, STREAM_PULSES, block)
    n = on.size
    first_pulse = block * BLOCK_SIZE

    excited = on & (rng.random(n) < cfg.excitation_probability)
    pulse = np.flatnonzero(excited)
    # initial level: Xb, Xd, Yb, Yd, or no exciton on the studied transition
    ib, idk = cfg.initial_bright, cfg.initial_dark
    cum = np.cumsum([ib, idk, ib, idk])
    level = np.searchsorted(cum, rng.random(pulse.size), side="right")
    keep = level < 4
    pulse, level = pulse[keep], level[keep]
    axis = (level >= 2).astype(np.int8)
    dark = (level % 2).astype(bool)

    gf_x, gf_y, gs = composite_rates(cfg.rates)
    gf = np.array([gf_x, gf_y])
    rad = np.array([cfg.rates.gamma_rad_bright_x, cfg.rates.gamma_rad_bright_y])
    nr_b, bd = cfg.rates.gamma_nr_bright, cfg.rates.gamma_bd
    nr_d = cfg.rates.gamma_nr_dark
    wg_fraction = np.array([cfg.split_x.waveguide_fraction, cfg.split_y.waveguide_fraction])

    t = np.zeros(pulse.size)
    alive = np.ones(pulse.size, dtype=bool)
    emitted = np.zeros(pulse.size, dtype=bool)
    for _ in range(_MAX_JUMPS):
        idx = np.flatnonzero(alive)
        if idx.size == 0:
            break
        is_dark = dark[idx]
        total = np.where(is_dark, gs, gf[axis[idx]])
        stuck = total <= 0
        if np.any(stuck):
            alive[idx[stuck]] = False
            idx, is_dark, total = idx[~stuck], is_dark[~stuck], total[~stuck]
        t[idx] += rng.exponential(size=idx.size) / total
        u = rng.random(idx.size) * total
        # bright: radiative | nonradiative | flip to dark
        b = ~is_dark
        rad_b = rad[axis[idx]]
        photon = b & (u < rad_b)
        lost_b = b & ~photon & (u < rad_b + nr_b)
        # dark: nonradiative | flip to bright
        lost_d = is_dark & (u < nr_d)
        flip = ~(photon | lost_b | lost_d)
        emitted[idx[photon]] = True
        alive[idx[photon | lost_b | lost_d]] = False
        dark[idx[flip]] = ~dark[idx[flip]]
    else:
        raise RuntimeError("exciton cascade did not terminate")

    pulse, t, axis = pulse[emitted], t[emitted], axis[emitted]
    to_wg = rng.random(pulse.size) < wg_fraction[axis]
    channel = np.where(to_wg, WAVEGUIDE, RADIATION).astype(np.int8)
    pulse = pulse.astype(np.int64) + first_pulse
    return PhotonRecords(pulse * cfg.rep_period + t, channel, axis, pulse)


def _n_blocks(cfg: ExperimentConfig) -> int:
    return -(-cfg.n_pulses // BLOCK_SIZE)


def iter_pulse_blocks(cfg: ExperimentConfig):
    """Yield the photon records of each pulse block in order."""
    on = telegraph_states(cfg)
    for block in range(_n_blocks(cfg)):
        yield _simulate_block(cfg, block, on[block * BLOCK_SIZE:(block + 1) * BLOCK_SIZE])


def simulate_pulse_train(cfg: ExperimentConfig, threads: int = 1) -> PhotonRecords:
    """Simulate ``cfg.n_pulses`` excitation pulses.

    Returns every emitted photon with its absolute emission time. The output
    depends only on ``cfg``; ``threads`` affects wall time, not results.
    """
    on = telegraph_states(cfg)
    blocks = range(_n_blocks(cfg))

    def run(block):
        return _simulate_block(cfg, block, on[block * BLOCK_SIZE:(block + 1) * BLOCK_SIZE])

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    return PhotonRecords.concatenate(parts)
