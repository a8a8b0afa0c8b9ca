"""Beta factor from coupled and uncoupled decay fits."""

from __future__ import annotations

from ..core import BetaResult, DecayModel, beta_from_measured
from ..fitting.result import FitResult


def _fastest(fit):
    if isinstance(fit, tuple):
        model, result = fit
    else:
        model, result = None, fit
    if isinstance(result, dict):
        result = FitResult.from_dict(result)
    if not isinstance(result, FitResult):
        raise TypeError("expected a FitResult or a (DecayModel, FitResult) pair")
    if not result.converged:
        raise ValueError("fit did not converge")
    rate, sigma = result.rate(0)
    if isinstance(model, DecayModel) and model.components:
        rate = float(model.rates[0])
    return rate, sigma, result


def extract_beta(coupled_fit, uncoupled_fit) -> BetaResult:
    """Beta factor from the fastest (bright-exciton) rate of each fit."""
    gamma_c, s_c, res_c = _fastest(coupled_fit)
    gamma_uc, s_uc, res_uc = _fastest(uncoupled_fit)
    if gamma_uc >= gamma_c:
        raise ValueError(
            f"uncoupled rate {gamma_uc:.6g} ns^-1 is not below coupled rate {gamma_c:.6g} ns^-1")
    result = beta_from_measured(gamma_c, gamma_uc, s_c, s_uc)
    return BetaResult(**{**result.to_dict(),
                         "provenance": {"coupled": res_c.to_dict(),
                                        "uncoupled": res_uc.to_dict()}})
