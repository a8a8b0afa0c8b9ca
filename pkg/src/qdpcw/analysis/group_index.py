"""Group index from the free spectral range of Fabry-Perot resonances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._validation import check_positive

SECTIONS = ("blue", "red")


@dataclass(frozen=True, eq=False)
class GroupIndexCurve:
    """Group index samples ``n_g(lambda)`` of one waveguide section."""

    wavelength: np.ndarray
    n_g: np.ndarray
    sigma: np.ndarray
    section: str = "blue"

    def __post_init__(self):
        wl = np.asarray(self.wavelength, dtype=float)
        ng = np.asarray(self.n_g, dtype=float)
        sg = np.zeros_like(ng) if self.sigma is None else np.asarray(self.sigma, dtype=float)
        if not (wl.shape == ng.shape == sg.shape) or wl.ndim != 1:
            raise ValueError("wavelength, n_g and sigma must be 1-d arrays of equal length")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("wavelengths must be strictly increasing")
        bad = np.flatnonzero(ng < 1)
        if bad.size:
            raise ValueError(f"group index below 1 at {wl[bad[0]]:.4f} nm ({ng[bad[0]]:.4g})")
        if self.section not in SECTIONS:
            raise ValueError(f"section must be one of {SECTIONS}")
        object.__setattr__(self, "wavelength", wl)
        object.__setattr__(self, "n_g", ng)
        object.__setattr__(self, "sigma", sg)

    def __len__(self):
        return self.wavelength.size

    def interpolate(self, wavelength):
        """Linearly interpolated ``(n_g, sigma)``; raises outside the sampled range."""
        wavelength = np.atleast_1d(np.asarray(wavelength, dtype=float))
        outside = (wavelength < self.wavelength[0]) | (wavelength > self.wavelength[-1])
        if np.any(outside):
            bad = wavelength[outside][0]
            raise ValueError(
                f"reference group index does not cover {bad:.4f} nm "
                f"(covers {self.wavelength[0]:.4f}-{self.wavelength[-1]:.4f} nm)")
        return (np.interp(wavelength, self.wavelength, self.n_g),
                np.interp(wavelength, self.wavelength, self.sigma))

    def to_dict(self) -> dict:
        return {"section": self.section,
                "points": [{"lambda": float(l), "n_g": float(n), "sigma": float(s)}
                           for l, n, s in zip(self.wavelength, self.n_g, self.sigma)]}

    @classmethod
    def from_dict(cls, doc: dict) -> "GroupIndexCurve":
        pts = doc["points"]
        return cls(np.array([p["lambda"] for p in pts]), np.array([p["n_g"] for p in pts]),
                   np.array([p.get("sigma", 0.0) for p in pts]), doc.get("section", "blue"))


def _centers(peaks):
    lam = np.array([p.center for p in peaks], dtype=float)
    sig = np.array([p.center_sigma for p in peaks], dtype=float)
    order = np.argsort(lam)
    return lam[order], sig[order]


def extract_group_index(peaks, l_b: float, l_r: float | None = None, section: str = "blue",
                        n_b_reference: GroupIndexCurve | None = None) -> GroupIndexCurve:
    """Group index at each interior resonance from the averaged free spectral range.

    For resonance ``i`` the spacing is ``(lambda[i+1] - lambda[i-1]) / 2``.
    The blue-section index follows from its own length alone; the red
    section sits in a cavity that also contains the blue section, whose
    contribution is removed using ``n_b_reference``. Section lengths are in
    um, wavelengths in nm. The outermost resonances are dropped.
    """
    if section not in SECTIONS:
        raise ValueError(f"section must be one of {SECTIONS}")
    if len(peaks) < 3:
        raise ValueError(f"need at least 3 resonances, got {len(peaks)}")
    l_b_nm = check_positive(l_b, "l_b") * 1e3
    lam, sig = _centers(peaks)
    spacing = 0.5 * (lam[2:] - lam[:-2])
    centre, s_c = lam[1:-1], sig[1:-1]
    if np.any(spacing <= 0):
        raise ValueError("resonance wavelengths must be distinct")
    s_spacing = 0.5 * np.hypot(sig[2:], sig[:-2])

    if section == "blue":
        length = l_b_nm
    else:
        if n_b_reference is None:
            raise ValueError("red-section extraction needs a blue-section reference curve")
        length = check_positive(l_r, "l_r") * 1e3
    path_index = centre**2 / (2.0 * length * spacing)
    # d/d(lambda_i) and d/d(spacing) of lambda^2 / (2 l spacing)
    var = (2.0 * path_index / centre * s_c) ** 2 + (path_index / spacing * s_spacing) ** 2
    n_g = path_index
    if section == "red":
        n_b, s_b = n_b_reference.interpolate(centre)
        ratio = l_b_nm / length
        n_g = path_index - n_b * ratio
        var = var + (ratio * s_b) ** 2
    return GroupIndexCurve(centre, n_g, np.sqrt(var), section)
