"""Damped Fisher-scoring (Levenberg-Marquardt) minimiser for count data."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class LMState:
    theta: np.ndarray
    objective: float
    gradient: np.ndarray
    curvature: np.ndarray
    converged: bool
    n_iter: int


def objective_terms(y, mu, jac, kind):
    """Objective, gradient and scoring curvature for Poisson or weighted LSQ.

    ``kind='poisson'`` uses the Poisson deviance ``2 sum(mu - y + y log(y/mu))``;
    ``kind='wls'`` uses ``sum((y - mu)^2 / max(y, 1))``.
    """
    if kind == "poisson":
        if np.any(mu < 0) or np.any((mu == 0) & (y > 0)):
            return np.inf, None, None
        with np.errstate(divide="ignore", invalid="ignore"):
            # difference of logs: y / mu overflows for denormal mu
            log_term = np.where(y > 0, y * (np.log(np.where(y > 0, y, 1.0)) - np.log(mu)), 0.0)
        value = 2.0 * np.sum(mu - y + log_term)
        if jac is None:
            return value, None, None
        with np.errstate(over="ignore", divide="ignore"):
            inv_mu = np.where(mu > 0, 1.0 / np.where(mu > 0, mu, 1.0), 0.0)
        inv_mu = np.minimum(inv_mu, 1e300)
        grad = 2.0 * jac.T @ (1.0 - y * inv_mu)
        curv = 2.0 * (jac.T * inv_mu) @ jac
        return value, grad, curv
    if kind == "wls":
        var = np.maximum(y, 1.0)
        resid = y - mu
        value = float(np.sum(resid**2 / var))
        if jac is None:
            return value, None, None
        grad = -2.0 * jac.T @ (resid / var)
        curv = 2.0 * (jac.T / var) @ jac
        return value, grad, curv
    raise ValueError(f"unknown objective {kind!r}")


def scaled_gradient(grad, curv, free):
    diag = np.diag(curv)[free]
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.abs(grad[free]) / np.sqrt(np.where(diag > 0, diag, np.inf))
    return float(np.max(s)) if s.size else 0.0


def minimize(model, y, theta0, lower, upper, kind="poisson", tol=1e-7, max_iter=1000):
    """Minimise the count-data objective of ``model``.

    ``model(theta, jac=True)`` returns ``(mu, dmu/dtheta)``. Parameters
    outside ``[lower, upper]`` are clipped back; a parameter sitting on its
    lower bound with the gradient pushing outward is held fixed. Converged
    means every free gradient component is below ``tol`` in units of the
    local standard error.
    """
    theta = np.clip(np.asarray(theta0, dtype=float), lower, upper)
    mu, jac = model(theta, jac=True)
    value, grad, curv = objective_terms(y, mu, jac, kind)
    if not np.isfinite(value):
        return LMState(theta, np.inf, np.zeros_like(theta), np.eye(theta.size), False, 0)
    damping = 1e-3
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        at_bound = (theta <= lower) & (grad > 0)
        free = ~at_bound
        if scaled_gradient(grad, curv, free) < tol:
            converged = True
            break
        H = curv[np.ix_(free, free)]
        g = grad[free]
        diag = np.diag(H).copy()
        diag[diag <= 0] = 1.0
        improved = False
        while damping < 1e20:
            try:
                step = np.linalg.solve(H + damping * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                damping *= 10
                continue
            trial = theta.copy()
            trial[free] += step
            trial = np.clip(trial, lower, upper)
            mu_t, _ = model(trial, jac=False)
            value_t, _, _ = objective_terms(y, mu_t, None, kind)
            if np.isfinite(value_t) and value_t <= value:
                improved = value_t < value or np.array_equal(trial, theta)
                theta = trial
                damping = max(damping / 5.0, 1e-12)
                break
            damping *= 5.0
        if not improved:
            # no descent possible at machine precision
            mu, jac = model(theta, jac=True)
            value, grad, curv = objective_terms(y, mu, jac, kind)
            free = ~((theta <= lower) & (grad > 0))
            converged = scaled_gradient(grad, curv, free) < np.sqrt(tol)
            break
        mu, jac = model(theta, jac=True)
        value, grad, curv = objective_terms(y, mu, jac, kind)
    return LMState(theta, float(value), grad, curv, converged, it)
