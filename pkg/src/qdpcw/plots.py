"""Deterministic SVG figures for the CLI and the report."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_RC = {"svg.hashsalt": "qdpcw", "svg.fonttype": "none", "font.size": 9}


def _save(fig, path):
    with matplotlib.rc_context(_RC):
        fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _figure():
    with matplotlib.rc_context(_RC):
        return plt.subplots(figsize=(5.0, 3.4), layout="constrained")


def plot_decay(hist, expected, path):
    """Decay histogram on a log axis with the fitted model overlaid."""
    fig, ax = _figure()
    ax.semilogy(hist.centers, np.maximum(hist.counts, 0.5), ".", ms=2, color="0.4", label="data")
    if expected is not None:
        ax.semilogy(hist.centers, expected, "-", color="C3", lw=1, label="fit")
    ax.set_xlabel("time (ns)")
    ax.set_ylabel("counts")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_spectrum(spectrum, peaks, path):
    fig, ax = _figure()
    ax.plot(spectrum.wavelength, spectrum.counts, lw=0.6, color="0.3")
    for p in peaks:
        ax.axvline(p.center, color="C3", lw=0.4, alpha=0.6)
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("counts")
    return _save(fig, path)


def plot_group_index(curves, path):
    fig, ax = _figure()
    for curve in curves:
        ax.errorbar(curve.wavelength, curve.n_g, yerr=curve.sigma, fmt="o", ms=3,
                    label=f"{curve.section} section")
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("group index")
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_g2(coinc, result, path):
    fig, ax = _figure()
    ax.plot(coinc.centers, coinc.counts, lw=0.5, color="0.3")
    env = result.envelope
    if not result.degraded and result.peak_delays is not None:
        tau = np.linspace(coinc.bin_edges[0], coinc.bin_edges[-1], 801)
        # peak areas spread over one repetition period give the mean bin height
        scale = coinc.bin_width / coinc.rep_period
        curve = (env["amplitude"] * np.exp(-np.abs(tau) / env["tau_b"]) + env["offset"]) * scale
        ax.plot(tau, curve, color="C3", lw=1, label="envelope")
        ax.legend(frameon=False)
    ax.set_xlabel("delay (ns)")
    ax.set_ylabel("coincidences")
    ax.set_title(f"g2(0) = {result.g2_zero:.3f}")
    return _save(fig, path)


def plot_budget(budget, path):
    """Waterfall of photon rates through each stage."""
    stages = budget.cumulative()
    fig, ax = _figure()
    names = [s[0] for s in stages]
    rates = [s[1] for s in stages]
    ax.bar(range(len(rates)), rates, color="C0")
    ax.set_yscale("log")
    ax.set_xticks(range(len(rates)), names, rotation=45, ha="right")
    ax.set_ylabel("rate (1/s)")
    return _save(fig, path)


def plot_beta_scatter(wavelength, beta, sigma, path, threshold=0.9):
    fig, ax = _figure()
    ax.errorbar(wavelength, beta, yerr=sigma, fmt="o", ms=3)
    ax.axhline(threshold, color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("wavelength (nm)")
    ax.set_ylabel("beta factor")
    return _save(fig, path)
