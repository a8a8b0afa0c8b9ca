"""Photon budget from the emitter to the detector."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .._validation import check_positive, check_probability

# Share of the waveguide emission sent towards the collection optics
OUTCOUPLER_SHARE = {"grating": 0.25, "taper": 0.5}
# Fraction of the outcoupled light collected by the objective, by numerical aperture
COLLECTION_EFFICIENCY = {0.65: 0.45, 0.82: 0.70}
DEFAULT_SETUP_FACTORS = {"beam_sampler": 0.90, "fiber_matings": 0.50,
                         "spectrometer": 0.20, "detector": 0.35}
PROPAGATION_DECAY_LENGTH = 30.0  # um


@dataclass(frozen=True)
class PhotonBudget:
    """Stage-by-stage photon rates (photons per second)."""

    rep_rate: float
    stages: tuple
    waveguide_rate: float
    emitted_rate: float
    detected_rate: float

    @property
    def total_efficiency(self) -> float:
        return self.detected_rate / (self.rep_rate * 1e6)

    def cumulative(self) -> list:
        """``(stage, rate)`` after each stage, starting at the pulse rate."""
        rate = self.rep_rate * 1e6
        out = [("pulses", rate)]
        for name, factor in self.stages:
            rate *= factor
            out.append((name, rate))
        return out

    def to_dict(self) -> dict:
        return {"kind": "budget", "rep_rate": self.rep_rate,
                "stages": [{"name": n, "factor": f} for n, f in self.stages],
                "waveguide_rate": self.waveguide_rate, "emitted_rate": self.emitted_rate,
                "detected_rate": self.detected_rate}


def compute_budget(rep_rate: float, beta: float, excitation_efficiency: float,
                   outcoupler: str = "grating", lens_na: float = 0.65, setup_factors=None,
                   propagation_length: float | None = None,
                   unmodeled_coupling: float = 1.0) -> PhotonBudget:
    """Detected count rate for one photon per pulse at most.

    Parameters
    ----------
    rep_rate : float
        Pulse repetition rate in MHz.
    beta : float
        Fraction of the emission into the waveguide mode.
    excitation_efficiency : float
        Probability that a pulse produces a photon (blinking duty cycle).
    outcoupler : {'grating', 'taper'}
    lens_na : float
        Objective numerical aperture; must be a tabulated value.
    setup_factors : dict or sequence, optional
        Transmission of each optical element after the objective; a plain
        sequence is named ``setup_1``, ``setup_2`` and so on. Defaults to
        a beam sampler (0.90), fiber matings (0.50), a spectrometer (0.20)
        and the detector (0.35).
    propagation_length : float, optional
        Waveguide length (um) between emitter and outcoupler.
    unmodeled_coupling : float
        Additional unexplained loss factor.
    """
    rep_rate = check_positive(rep_rate, "rep_rate")
    stages = [("beta", float(beta)), ("excitation", float(excitation_efficiency))]
    if propagation_length is not None:
        if propagation_length < 0:
            raise ValueError("propagation_length must be >= 0")
        stages.append(("propagation", math.exp(-propagation_length / PROPAGATION_DECAY_LENGTH)))
    try:
        share = OUTCOUPLER_SHARE[outcoupler]
        coll = COLLECTION_EFFICIENCY[float(lens_na)]
    except KeyError:
        raise ValueError(
            f"no collection efficiency for outcoupler {outcoupler!r} at NA {lens_na}; known "
            f"outcouplers {sorted(OUTCOUPLER_SHARE)}, NAs {sorted(COLLECTION_EFFICIENCY)}") from None
    stages += [("outcoupler", share), ("collection", coll),
               ("unmodeled", float(unmodeled_coupling))]
    if setup_factors is None:
        factors = DEFAULT_SETUP_FACTORS
    elif isinstance(setup_factors, dict):
        factors = setup_factors
    else:
        factors = {f"setup_{i + 1}": v for i, v in enumerate(setup_factors)}
    for name, value in factors.items():
        stages.append((str(name), value))
    for name, value in stages:
        check_probability(value, name, allow_zero=False)
    pulses = rep_rate * 1e6
    # product over sorted factors is independent of the order they were given in
    detected = pulses * math.prod(sorted(f for _, f in stages))
    return PhotonBudget(rep_rate, tuple(stages), pulses * stages[0][1],
                        pulses * stages[0][1] * stages[1][1], detected)
