"""Fit result container shared by all fitters."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Background, DecayModel


class FitError(RuntimeError):
    """A fit failed to converge from every starting point."""


@dataclass
class FitResult:
    names: list
    values: np.ndarray
    covariance: np.ndarray
    goodness: float
    objective: float
    n_points: int
    converged: bool
    n_starts_used: int = 1
    n_converged: int = 1
    n_iter: int = 0
    estimator: str = "poisson"
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.covariance = np.asarray(self.covariance, dtype=float)

    @property
    def sigmas(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.covariance), 0.0, None))

    @property
    def parameters(self) -> dict:
        return dict(zip(self.names, self.values.tolist()))

    @property
    def sigma(self) -> dict:
        return dict(zip(self.names, self.sigmas.tolist()))

    @property
    def n_params(self) -> int:
        return len(self.names)

    @property
    def n_components(self) -> int:
        return sum(1 for n in self.names if n.startswith("rate_"))

    def rate(self, i=0):
        """Rate of the ``i``-th fastest component and its standard error."""
        j = self.names.index(f"rate_{i + 1}")
        return float(self.values[j]), float(self.sigmas[j])

    def to_decay_model(self, gamma_b: float | None = None) -> DecayModel:
        """Decay model of the fitted values; ``gamma_b`` fills in a fixed background rate."""
        p = self.parameters
        n = self.n_components
        comps = tuple((p[f"amplitude_{i + 1}"], p[f"rate_{i + 1}"]) for i in range(n))
        bg = Background(p.get("b0", 0.0), p.get("b1", 0.0), p.get("gamma_b", gamma_b or 0.0))
        return DecayModel(comps, bg)

    def to_dict(self) -> dict:
        return {
            "parameters": self.parameters,
            "sigmas": self.sigma,
            "names": list(self.names),
            "covariance": self.covariance.tolist(),
            "goodness": self.goodness,
            "objective": self.objective,
            "n_points": self.n_points,
            "converged": self.converged,
            "n_starts_used": self.n_starts_used,
            "n_converged": self.n_converged,
            "n_iter": self.n_iter,
            "estimator": self.estimator,
            "flags": list(self.flags),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "FitResult":
        names = list(doc["names"])
        return cls(
            names=names,
            values=np.array([doc["parameters"][n] for n in names]),
            covariance=np.array(doc["covariance"], dtype=float).reshape(len(names), len(names)),
            goodness=doc["goodness"], objective=doc["objective"], n_points=doc["n_points"],
            converged=doc["converged"], n_starts_used=doc.get("n_starts_used", 1),
            n_converged=doc.get("n_converged", 1), n_iter=doc.get("n_iter", 0),
            estimator=doc.get("estimator", "poisson"), flags=list(doc.get("flags", [])))
