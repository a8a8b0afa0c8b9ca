"""Exciton rate model and beta-factor bookkeeping.

All rates are in ns^-1 and all times in ns.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._validation import check_finite_nonnegative

#: Measured average radiative rate of a dot in bulk material (ns^-1).
GAMMA_HOM = 0.91
GAMMA_HOM_SIGMA = 0.08
#: Measured average nonradiative rate (ns^-1).
GAMMA_NR = 0.030
GAMMA_NR_SIGMA = 0.018

#: Default post-pulse populations per exciton branch.
DEFAULT_INITIAL_BRIGHT = 0.25
DEFAULT_INITIAL_DARK = 0.25

AXES = ("X", "Y")

#: relative root splitting below which a branch is treated as degenerate
_DEGENERATE = 1e-8


def _check_axis(axis: str) -> str:
    axis = str(axis).upper()
    if axis not in AXES:
        raise ValueError(f"dipole axis must be 'X' or 'Y', got {axis!r}")
    return axis


@dataclass(frozen=True)
class RateSet:
    """Decay and spin-flip rates of the five-level exciton model."""

    gamma_rad_bright_x: float = 0.0
    gamma_rad_bright_y: float = 0.0
    gamma_nr_bright: float = 0.0
    gamma_nr_dark: float = 0.0
    gamma_bd: float = 0.0
    gamma_db: float = 0.0

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            value = float(getattr(self, name))
            check_finite_nonnegative(value, name)
            object.__setattr__(self, name, value)

    @classmethod
    def from_splits(cls, split_x: "EmissionChannelSplit", split_y: "EmissionChannelSplit",
                    gamma_nr_dark: float = 0.0, gamma_bd: float = 0.0,
                    gamma_db: float = 0.0) -> "RateSet":
        """Build a rate set whose bright radiative rates are ``wg + rad`` of each split.

        Both splits must share the same nonradiative rate.
        """
        if not math.isclose(split_x.gamma_nr, split_y.gamma_nr, rel_tol=1e-12, abs_tol=1e-15):
            raise ValueError("X and Y splits must share gamma_nr")
        return cls(
            gamma_rad_bright_x=split_x.gamma_wg + split_x.gamma_rad,
            gamma_rad_bright_y=split_y.gamma_wg + split_y.gamma_rad,
            gamma_nr_bright=split_x.gamma_nr,
            gamma_nr_dark=gamma_nr_dark,
            gamma_bd=gamma_bd,
            gamma_db=gamma_db,
        )

    def radiative(self, axis: str) -> float:
        return self.gamma_rad_bright_x if _check_axis(axis) == "X" else self.gamma_rad_bright_y

    def to_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class EmissionChannelSplit:
    """Waveguide, radiation-mode and nonradiative decay rates of one bright state."""

    gamma_wg: float = 0.0
    gamma_rad: float = 0.0
    gamma_nr: float = 0.0

    def __post_init__(self):
        for name in ("gamma_wg", "gamma_rad", "gamma_nr"):
            value = float(getattr(self, name))
            check_finite_nonnegative(value, name)
            object.__setattr__(self, name, value)

    @property
    def total(self) -> float:
        return self.gamma_wg + self.gamma_rad + self.gamma_nr

    @property
    def loss(self) -> float:
        """Rate of every channel other than the guided mode."""
        return self.gamma_rad + self.gamma_nr

    @property
    def waveguide_fraction(self) -> float:
        """Probability that a radiative decay emits into the guided mode."""
        radiative = self.gamma_wg + self.gamma_rad
        return self.gamma_wg / radiative if radiative > 0 else 0.0

    def to_dict(self) -> dict:
        return {"gamma_wg": self.gamma_wg, "gamma_rad": self.gamma_rad, "gamma_nr": self.gamma_nr}


@dataclass(frozen=True)
class Background:
    """Time-dependent background ``b0 + b1 * exp(-gamma_b * t)`` in counts/ns."""

    b0: float = 0.0
    b1: float = 0.0
    gamma_b: float = 0.0

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return self.b0 + self.b1 * np.exp(-self.gamma_b * t)


@dataclass(frozen=True)
class DecayModel:
    """Sum of exponential components plus background.

    ``components`` holds ``(amplitude, rate)`` pairs; amplitudes are in
    counts/ns at ``t = 0``. Components are stored fastest first.
    """

    components: tuple = ()
    background: Background = field(default_factory=Background)

    def __post_init__(self):
        comps = []
        for amplitude, rate in self.components:
            amplitude, rate = float(amplitude), float(rate)
            if not (np.isfinite(amplitude) and amplitude >= 0):
                raise ValueError(f"component amplitude must be >= 0, got {amplitude}")
            if not (np.isfinite(rate) and rate > 0):
                raise ValueError(f"component rate must be > 0, got {rate}")
            comps.append((amplitude, rate))
        if len(comps) > 3:
            raise ValueError("at most three decay components are supported")
        comps.sort(key=lambda c: (-c[1], -c[0]))
        object.__setattr__(self, "components", tuple(comps))

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.components])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([a for a, _ in self.components])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.background(t)
        for amplitude, rate in self.components:
            out = out + amplitude * np.exp(-rate * t)
        return out

    def to_dict(self) -> dict:
        return {
            "components": [{"amplitude": a, "rate": r} for a, r in self.components],
            "background": {"b0": self.background.b0, "b1": self.background.b1,
                           "gamma_b": self.background.gamma_b},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DecayModel":
        bg = doc.get("background", {})
        return cls(
            components=tuple((c["amplitude"], c["rate"]) for c in doc["components"]),
            background=Background(bg.get("b0", 0.0), bg.get("b1", 0.0), bg.get("gamma_b", 0.0)),
        )


@dataclass(frozen=True)
class BetaResult:
    beta: float
    beta_sigma: float
    eta: float
    eta_sigma: float
    gamma_c: float
    gamma_c_sigma: float
    gamma_uc: float
    gamma_uc_sigma: float
    provenance: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k) for k in (
            "beta", "beta_sigma", "eta", "eta_sigma",
            "gamma_c", "gamma_c_sigma", "gamma_uc", "gamma_uc_sigma")}
        if self.provenance:
            out["provenance"] = self.provenance
        return out


# ---------------------------------------------------------------------------
# rate arithmetic


def composite_rates(rates: RateSet) -> tuple[float, float, float]:
    """Return the fast X, fast Y and slow decay rates of ``rates``."""
    gamma_f_x = rates.gamma_rad_bright_x + rates.gamma_nr_bright + rates.gamma_bd
    gamma_f_y = rates.gamma_rad_bright_y + rates.gamma_nr_bright + rates.gamma_bd
    gamma_s = rates.gamma_nr_dark + rates.gamma_db
    return gamma_f_x, gamma_f_y, gamma_s


def beta_from_channels(split: EmissionChannelSplit) -> float:
    total = split.total
    if not total > 0:
        raise ValueError("beta is undefined when all decay channels vanish")
    return split.gamma_wg / total


def cooperativity(beta: float) -> float:
    """Single-emitter cooperativity ``beta / (1 - beta)``."""
    if not 0 <= beta < 1:
        raise ValueError(f"cooperativity needs 0 <= beta < 1, got {beta}")
    return beta / (1.0 - beta)


def beta_from_measured(gamma_c: float, gamma_uc: float, gamma_c_sigma: float = 0.0,
                       gamma_uc_sigma: float = 0.0) -> BetaResult:
    """Beta factor and cooperativity from coupled and uncoupled decay rates.

    Uncertainties are propagated to first order assuming independent
    Gaussian errors on the two rates.
    """
    gamma_c, gamma_uc = float(gamma_c), float(gamma_uc)
    if gamma_c == 0:
        raise ValueError("coupled rate must be nonzero")
    if gamma_c_sigma < 0 or gamma_uc_sigma < 0:
        raise ValueError("rate uncertainties must be >= 0")
    if not gamma_uc > 0:
        raise ValueError(f"uncoupled rate must be > 0, got {gamma_uc}")
    if gamma_uc >= gamma_c:
        raise ValueError(
            f"uncoupled rate {gamma_uc} ns^-1 must be below coupled rate {gamma_c} ns^-1")
    beta = (gamma_c - gamma_uc) / gamma_c
    beta_sigma = math.hypot(gamma_uc / gamma_c**2 * gamma_c_sigma, gamma_uc_sigma / gamma_c)
    eta = beta / (1.0 - beta)
    eta_sigma = beta_sigma / (1.0 - beta) ** 2
    return BetaResult(beta, beta_sigma, eta, eta_sigma,
                      gamma_c, float(gamma_c_sigma), gamma_uc, float(gamma_uc_sigma))


def beta_monte_carlo(gamma_c: float, gamma_uc: float, gamma_c_sigma: float,
                     gamma_uc_sigma: float, n_samples: int = 100_000, seed: int = 0):
    """Resampling cross-check of the first-order beta uncertainty.

    Returns ``(beta_std, eta_std)`` over Gaussian draws of both rates.
    """
    rng = np.random.default_rng(seed)
    gc = rng.normal(gamma_c, gamma_c_sigma, n_samples)
    guc = rng.normal(gamma_uc, gamma_uc_sigma, n_samples)
    beta = (gc - guc) / gc
    eta = beta / (1 - beta)
    return float(beta.std(ddof=1)), float(eta.std(ddof=1))


def radiative_rate_from_fit(gamma_f: float, gamma_s: float) -> float:
    """Bright radiative rate as the difference of fast and slow rates.

    Assumes equal bright and dark nonradiative rates and equal spin-flip
    rates in both directions.
    """
    if gamma_s < 0:
        raise ValueError("slow rate must be >= 0")
    if not gamma_f > gamma_s:
        raise ValueError(f"fast rate {gamma_f} must exceed slow rate {gamma_s}")
    return gamma_f - gamma_s


def purcell_scale(n_g_target: float, n_g_ref: float, gamma_wg_ref: float) -> float:
    """Scale a guided-mode rate linearly with group index."""
    if n_g_ref == 0:
        raise ValueError("reference group index must be nonzero")
    if n_g_target < 1 or n_g_ref < 1:
        raise ValueError("group indices must be >= 1")
    if gamma_wg_ref < 0:
        raise ValueError("reference rate must be >= 0")
    return gamma_wg_ref * (n_g_target / n_g_ref)


# ---------------------------------------------------------------------------
# level dynamics


@dataclass(frozen=True)
class LevelDynamics:
    """Closed-form bright/dark populations of one exciton branch.

    ``bright(t) = sum(bright_amplitudes * exp(-eigenrates * t))``; in the
    degenerate case (equal eigenrates) a secular ``t * exp(-r t)`` term with
    coefficient ``bright_secular`` is added, and likewise for the dark state.
    """

    eigenrates: tuple
    bright_amplitudes: tuple
    dark_amplitudes: tuple
    gamma_f: float
    gamma_s: float
    gamma_rad: float
    gamma_nr_bright: float
    gamma_nr_dark: float
    initial_bright: float
    initial_dark: float
    bright_secular: float = 0.0
    dark_secular: float = 0.0

    def _evaluate(self, t, amplitudes, secular):
        t = np.asarray(t, dtype=float)
        r = np.asarray(self.eigenrates)
        out = np.zeros_like(t)
        for a, rate in zip(amplitudes, r):
            out = out + a * np.exp(-rate * t)
        if secular:
            out = out + secular * t * np.exp(-r[0] * t)
        return out

    def bright(self, t):
        return self._evaluate(t, self.bright_amplitudes, self.bright_secular)

    def dark(self, t):
        return self._evaluate(t, self.dark_amplitudes, self.dark_secular)

    def _integral(self, t, amplitudes, secular):
        """Integral of a population from 0 to ``t`` (``t`` may be inf)."""
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for a, rate in zip(amplitudes, self.eigenrates):
            if rate > 0:
                out = out + a * -np.expm1(-rate * t) / rate
            else:
                out = out + a * t
        if secular:
            r = self.eigenrates[0]
            with np.errstate(invalid="ignore"):
                term = (1 - np.exp(-r * t) * (1 + r * t)) / r**2
            out = out + secular * np.where(np.isinf(t), 1 / r**2, term)
        return out

    def bright_integral(self, t=np.inf):
        return self._integral(t, self.bright_amplitudes, self.bright_secular)

    def dark_integral(self, t=np.inf):
        return self._integral(t, self.dark_amplitudes, self.dark_secular)

    def emission_rate(self, t):
        """Radiative photon emission rate ``gamma_rad * bright(t)``."""
        return self.gamma_rad * self.bright(t)

    def decayed(self, t):
        """Population that has returned to the ground state by time ``t``."""
        return ((self.gamma_rad + self.gamma_nr_bright) * self.bright_integral(t)
                + self.gamma_nr_dark * self.dark_integral(t))


def _two_level_coefficients(r1, r2, x0, slope0):
    """Amplitudes of ``x(t) = a1 e^{-r1 t} + a2 e^{-r2 t}`` from ``x(0)`` and ``x'(0)``."""
    if r1 == r2:
        return (x0, 0.0), slope0 + r1 * x0
    a1 = (-slope0 - r2 * x0) / (r1 - r2)
    a2 = (slope0 + r1 * x0) / (r1 - r2)
    return (a1, a2), 0.0


def solve_level_dynamics(rates: RateSet, initial_bright: float = DEFAULT_INITIAL_BRIGHT,
                         initial_dark: float = DEFAULT_INITIAL_DARK,
                         dipole_axis: str = "X") -> LevelDynamics:
    """Solve the coupled bright/dark rate equations of one exciton branch.

    The system ``b' = -Gf b + g_db d``, ``d' = g_bd b - Gs d`` is
    diagonalised exactly; the returned eigenrates are its eigenvalues
    (fastest first) and are close to, but not equal to, ``(Gf, Gs)`` when
    both spin-flip rates are nonzero.
    """
    if initial_bright < 0 or initial_dark < 0:
        raise ValueError("initial populations must be >= 0")
    if initial_bright + initial_dark > 1 + 1e-12:
        raise ValueError("initial populations must sum to <= 1")
    axis = _check_axis(dipole_axis)
    gf_x, gf_y, gs = composite_rates(rates)
    gf = gf_x if axis == "X" else gf_y
    g_bd, g_db = rates.gamma_bd, rates.gamma_db

    trace = gf + gs
    det = gf * gs - g_bd * g_db
    disc = math.sqrt((gf - gs) ** 2 + 4.0 * g_bd * g_db)
    if disc <= _DEGENERATE * trace:
        # near-equal roots: the split into two exponentials is ill-conditioned,
        # while r = trace/2 misses the determinant only by disc^2/4
        r1 = r2 = 0.5 * trace
    else:
        r1 = 0.5 * (trace + disc)
        # product form avoids cancellation in the slow root
        r2 = det / r1

    b_slope = -gf * initial_bright + g_db * initial_dark
    d_slope = g_bd * initial_bright - gs * initial_dark
    b_amp, b_sec = _two_level_coefficients(r1, r2, initial_bright, b_slope)
    d_amp, d_sec = _two_level_coefficients(r1, r2, initial_dark, d_slope)
    return LevelDynamics(
        eigenrates=(r1, r2),
        bright_amplitudes=b_amp,
        dark_amplitudes=d_amp,
        gamma_f=gf,
        gamma_s=gs,
        gamma_rad=rates.radiative(axis),
        gamma_nr_bright=rates.gamma_nr_bright,
        gamma_nr_dark=rates.gamma_nr_dark,
        initial_bright=float(initial_bright),
        initial_dark=float(initial_dark),
        bright_secular=b_sec,
        dark_secular=d_sec,
    )


def emission_profile(rates: RateSet, waveguide_fraction: dict | None = None,
                     initial_bright: float = DEFAULT_INITIAL_BRIGHT,
                     initial_dark: float = DEFAULT_INITIAL_DARK):
    """Per-axis dynamics and photon weights for the guided-mode emission rate.

    Returns a list of ``(dynamics, weight)`` where the guided photon rate is
    ``sum(weight * dynamics.bright(t))``. ``waveguide_fraction`` maps axis to
    the probability that a radiative decay enters the guided mode (1 if
    omitted).
    """
    waveguide_fraction = waveguide_fraction or {}
    out = []
    for axis in AXES:
        dyn = solve_level_dynamics(rates, initial_bright, initial_dark, axis)
        out.append((dyn, dyn.gamma_rad * waveguide_fraction.get(axis, 1.0)))
    return out


# ---------------------------------------------------------------------------
# mode data


@dataclass(frozen=True)
class ModeDataEntry:
    x: float
    y: float
    dipole_axis: str
    n_g: float
    p_wg_over_p_hom: float
    p_rad_over_p_hom: float


@dataclass(frozen=True)
class ModeDataTable:
    """Tabulated emitted-power ratios at positions inside one unit cell."""

    entries: tuple
    lattice_constant: float

    def __post_init__(self):
        a = float(self.lattice_constant)
        if not a > 0:
            raise ValueError("lattice constant must be > 0")
        for i, e in enumerate(self.entries):
            _check_entry(e, a, f"entry {i}")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @classmethod
    def from_csv(cls, path, lattice_constant: float | None = None) -> "ModeDataTable":
        return read_mode_table(path, lattice_constant)


def _check_entry(e: ModeDataEntry, a: float, where: str):
    if e.dipole_axis not in AXES:
        raise ValueError(f"{where}: dipole axis must be 'X' or 'Y', got {e.dipole_axis!r}")
    if not 0 <= e.x < a:
        raise ValueError(f"{where}: x = {e.x} nm outside the unit cell [0, {a})")
    if e.p_wg_over_p_hom < 0 or e.p_rad_over_p_hom < 0:
        raise ValueError(f"{where}: power ratios must be >= 0")
    if not e.n_g >= 1:
        raise ValueError(f"{where}: group index must be >= 1, got {e.n_g}")


MODE_TABLE_HEADER = ["x_nm", "y_nm", "axis", "n_g", "p_wg_ratio", "p_rad_ratio"]


def read_mode_table(path, lattice_constant: float | None = None) -> ModeDataTable:
    """Load a mode-data CSV.

    Lines starting with ``#`` are comments; ``# lattice_constant_nm=...``
    supplies the lattice constant when it is not passed explicitly.
    Malformed rows raise ``ValueError`` naming the line.
    """
    entries = []
    header_seen = False
    with open(path, newline="") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            if stripped.startswith("#"):
                key, _, value = stripped.lstrip("#").strip().partition("=")
                if key.strip() == "lattice_constant_nm" and lattice_constant is None:
                    lattice_constant = float(value)
                continue
            row = next(csv.reader([stripped]))
            if not header_seen:
                if [c.strip() for c in row] != MODE_TABLE_HEADER:
                    raise ValueError(
                        f"{path}:{lineno}: expected header {','.join(MODE_TABLE_HEADER)}")
                header_seen = True
                continue
            if len(row) != len(MODE_TABLE_HEADER):
                raise ValueError(f"{path}:{lineno}: expected 6 fields, got {len(row)}")
            try:
                entry = ModeDataEntry(
                    x=float(row[0]), y=float(row[1]), dipole_axis=row[2].strip().upper(),
                    n_g=float(row[3]), p_wg_over_p_hom=float(row[4]),
                    p_rad_over_p_hom=float(row[5]))
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}") from None
            entries.append((lineno, entry))
    if not header_seen:
        raise ValueError(f"{path}: missing header")
    if lattice_constant is None:
        raise ValueError(f"{path}: lattice constant not given")
    for lineno, entry in entries:
        try:
            _check_entry(entry, float(lattice_constant), f"{path}:{lineno}")
        except ValueError as exc:
            raise ValueError(str(exc)) from None
    return ModeDataTable(tuple(e for _, e in entries), float(lattice_constant))


def write_mode_table(table: ModeDataTable, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# lattice_constant_nm={table.lattice_constant!r}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MODE_TABLE_HEADER)
        for e in table.entries:
            writer.writerow([repr(e.x), repr(e.y), e.dipole_axis, repr(e.n_g),
                             repr(e.p_wg_over_p_hom), repr(e.p_rad_over_p_hom)])


def rates_from_mode_data(entry: ModeDataEntry, gamma_hom: float = GAMMA_HOM,
                         gamma_nr: float = GAMMA_NR) -> EmissionChannelSplit:
    """Convert emitted-power ratios into absolute channel rates."""
    if not gamma_hom > 0:
        raise ValueError("gamma_hom must be > 0")
    return EmissionChannelSplit(
        gamma_wg=entry.p_wg_over_p_hom * gamma_hom,
        gamma_rad=entry.p_rad_over_p_hom * gamma_hom,
        gamma_nr=gamma_nr,
    )


def max_beta_by_position(table: ModeDataTable, gamma_hom: float = GAMMA_HOM,
                         gamma_nr: float = GAMMA_NR) -> dict:
    """Largest beta of the two dipole orientations at each tabulated position.

    Returns ``{(x, y, n_g): beta}``.
    """
    best: dict = {}
    for e in table.entries:
        beta = beta_from_channels(rates_from_mode_data(e, gamma_hom, gamma_nr))
        key = (e.x, e.y, e.n_g)
        best[key] = max(best.get(key, 0.0), beta)
    return best


def example_mode_table_path() -> Path:
    """Path of the bundled illustrative mode-data table."""
    return Path(__file__).with_name("data") / "example_mode_table.csv"

