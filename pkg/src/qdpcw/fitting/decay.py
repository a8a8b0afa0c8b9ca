"""Poisson maximum-likelihood fitting of multi-exponential TCSPC decays."""

from __future__ import annotations

import itertools
import math
import warnings

import numpy as np
from scipy import optimize, special, stats
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..core import Background, DecayModel
from ..types import DecayHistogram
from . import _lm
from .result import FitError, FitResult

BACKGROUNDS = ("none", "constant", "exponential")
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


def _emg(t, rate, sigma):
    """Unit exponential convolved with a normalised Gaussian, and d/d(rate)."""
    u = (rate * sigma**2 - t) / (sigma * _SQRT2)
    gauss = np.exp(-0.5 * (t / sigma) ** 2)
    # erfcx keeps the large-u branch finite
    with np.errstate(over="ignore"):
        value = np.where(
            u > 0,
            0.5 * gauss * special.erfcx(np.maximum(u, 0.0)),
            0.5 * np.exp(0.5 * (rate * sigma) ** 2 - rate * t) * special.erfc(np.minimum(u, 0.0)),
        )
    deriv = value * (rate * sigma**2 - t) - sigma / _SQRT2PI * gauss
    return value, deriv


class DecayBasis:
    """Exponential decay shape seen by the detector, with optional IRF and wrap-around.

    Without an IRF the shape is ``exp(-rate t)``; wrap-around from earlier
    pulses only rescales it. With a Gaussian IRF of width ``sigma`` the
    current and previous pulse are convolved exactly; older pulses form a
    geometric series of convolved tails with ratio ``exp(-rate T)``.
    """

    def __init__(self, t, irf_sigma=0.0, rep_period=None):
        self.t = np.asarray(t, dtype=float)
        self.sigma = float(irf_sigma or 0.0)
        self.period = rep_period
        if self.sigma > 0 and rep_period is None:
            raise ValueError("IRF convolution needs the repetition period")

    def __call__(self, rate):
        t = self.t
        if self.sigma == 0:
            g = np.exp(-rate * t)
            return g, -t * g
        T, s = self.period, self.sigma
        g0, d0 = _emg(t, rate, s)
        g1, d1 = _emg(t - T, rate, s)
        q = math.exp(-rate * T)
        if q < 1:
            # pulses two or more periods back: successive terms shrink by q
            g2, d2 = _emg(t + T, rate, s)
            tail = g2 / (1.0 - q)
            dtail = d2 / (1.0 - q) - tail * T * q / (1.0 - q)
        else:
            tail = dtail = np.zeros_like(t)
        return g0 + g1 + tail, d0 + d1 + dtail


class DecayLikelihood:
    """Expected counts and Poisson likelihood of a multi-exponential decay.

    The parameter vector is ``[A_1..A_n, r_1..r_n, b0, (b1, gamma_b)]``;
    rates (``r_i`` and ``gamma_b``) are stored as logarithms when
    ``parameterization='log'``. Expected counts per bin are
    ``bin_width * I(t_center)``. Passing ``gamma_b`` fixes the background
    decay rate; left free it is interchangeable with a decay component.
    """

    def __init__(self, t, counts, bin_width, n_components, background="constant",
                 irf_sigma=0.0, rep_period=None, parameterization="log", gamma_b=None):
        if background not in BACKGROUNDS:
            raise ValueError(f"background must be one of {BACKGROUNDS}")
        if parameterization not in ("log", "linear"):
            raise ValueError("parameterization must be 'log' or 'linear'")
        self.t = np.asarray(t, dtype=float)
        self.y = np.asarray(counts, dtype=float)
        self.w = float(bin_width)
        self.n = int(n_components)
        self.background = background
        self.log = parameterization == "log"
        self.basis = DecayBasis(self.t, irf_sigma, rep_period)
        self.fixed_gamma_b = None if gamma_b is None else float(gamma_b)
        self.names = ([f"amplitude_{i + 1}" for i in range(self.n)]
                      + [f"rate_{i + 1}" for i in range(self.n)])
        if background != "none":
            self.names.append("b0")
        if background == "exponential":
            self.names.append("b1")
            if self.fixed_gamma_b is None:
                self.names.append("gamma_b")

    @property
    def n_params(self):
        return len(self.names)

    def _rate_mask(self):
        mask = np.zeros(self.n_params, dtype=bool)
        mask[self.n:2 * self.n] = True
        if self.free_gamma_b:
            mask[-1] = True
        return mask

    @property
    def free_gamma_b(self):
        return self.background == "exponential" and self.fixed_gamma_b is None

    def to_natural(self, theta):
        p = np.array(theta, dtype=float)
        if self.log:
            p[self._rate_mask()] = np.exp(p[self._rate_mask()])
        return p

    def from_natural(self, p):
        theta = np.array(p, dtype=float)
        if self.log:
            theta[self._rate_mask()] = np.log(theta[self._rate_mask()])
        return theta

    def bounds(self):
        lower = np.zeros(self.n_params)
        upper = np.full(self.n_params, np.inf)
        rates = self._rate_mask()
        if self.log:
            lower[rates], upper[rates] = -40.0, 40.0
        else:
            lower[rates] = 1e-12
        return lower, upper

    def expected(self, theta, jac=True):
        """Expected counts and, optionally, their Jacobian with respect to ``theta``."""
        p = self.to_natural(theta)
        n, w = self.n, self.w
        mu = np.zeros_like(self.t)
        J = np.zeros((self.t.size, self.n_params)) if jac else None
        for i in range(n):
            g, dg = self.basis(p[n + i])
            mu += p[i] * g
            if jac:
                J[:, i] = w * g
                J[:, n + i] = w * p[i] * dg * (p[n + i] if self.log else 1.0)
        k = 2 * n
        if self.background != "none":
            mu += p[k]
            if jac:
                J[:, k] = w
        if self.background == "exponential":
            gamma_b = p[k + 2] if self.free_gamma_b else self.fixed_gamma_b
            e = np.exp(-gamma_b * self.t)
            mu += p[k + 1] * e
            if jac:
                J[:, k + 1] = w * e
                if self.free_gamma_b:
                    J[:, k + 2] = -w * p[k + 1] * self.t * e * (gamma_b if self.log else 1.0)
        return w * mu, J

    def __call__(self, theta, jac=True):
        return self.expected(theta, jac)

    def nll(self, theta):
        """Negative Poisson log-likelihood up to a data-only constant."""
        mu, _ = self.expected(theta, jac=False)
        if np.any(mu < 0) or np.any((mu == 0) & (self.y > 0)):
            return np.inf
        with np.errstate(divide="ignore"):
            return float(np.sum(mu - np.where(self.y > 0, self.y * np.log(mu), 0.0)))

    def gradient(self, theta):
        mu, J = self.expected(theta, jac=True)
        return J.T @ (1.0 - self.y / mu)

    def fisher(self, theta, kind="poisson"):
        """Curvature matrix in natural parameters (rates, not log-rates)."""
        natural = DecayLikelihood.__new__(DecayLikelihood)
        natural.__dict__.update(self.__dict__)
        natural.log = False
        mu, J = natural.expected(self.to_natural(theta), jac=True)
        weight = 1.0 / np.maximum(self.y, 1.0) if kind == "wls" else 1.0 / mu
        return (J.T * weight) @ J

    def initial_amplitudes(self, rates, gamma_b=None):
        """Non-negative least-squares amplitudes for fixed rates."""
        cols = [self.basis(r)[0] for r in rates]
        if self.background != "none":
            cols.append(np.ones_like(self.t))
        if self.background == "exponential":
            cols.append(np.exp(-gamma_b * self.t))
        A = self.w * np.column_stack(cols)
        weight = 1.0 / np.sqrt(np.maximum(self.y, 1.0))
        coef, _ = optimize.nnls(A * weight[:, None], self.y * weight)
        return coef


def _rate_grid(t_span, bin_width, n_points):
    lo, hi = 1.0 / t_span, 1.0 / bin_width
    return np.geomspace(lo, hi, n_points)


def _start_points(n_components, n_starts, t_span, bin_width, exp_background):
    """Deterministic multi-start rate seeds drawn from a log-spaced grid."""
    m = n_components + 1
    while math.comb(m, n_components) < n_starts:
        m += 1
    grid = _rate_grid(t_span, bin_width, m + (1 if exp_background else 0))
    combos = list(itertools.combinations(range(m), n_components))
    pick = np.unique(np.linspace(0, len(combos) - 1, n_starts).round().astype(int))
    starts = []
    for k, c in enumerate(combos[i] for i in pick):
        rates = grid[list(c)][::-1]
        gamma_b = None
        if exp_background:
            unused = [j for j in range(grid.size) if j not in c]
            gamma_b = grid[unused[k % len(unused)]]
        starts.append((rates, gamma_b))
    return starts


def _lexkey(p):
    return tuple(np.round(p, 12))


class DecayFitter(BaseEstimator):
    """Multi-start Poisson maximum-likelihood fit of 1-3 exponential components.

    Parameters
    ----------
    n_components : int
        Number of exponential components (1-3); the upper limit when
        ``select_components`` is set.
    fit_range : (float, float), optional
        Time window in ns; bins whose centres fall inside are fitted.
    background : {'none', 'constant', 'exponential'}
        Background model ``b0`` or ``b0 + b1 exp(-gamma_b t)``.
    irf_fwhm : float, optional
        Gaussian IRF width in ns; the model is then convolved with it and
        wrapped over the repetition period.
    n_starts : int
        Number of local optimisations from log-spaced rate seeds (>= 8).
    parameterization : {'log', 'linear'}
        Whether rates are optimised as logarithms.
    estimator : {'poisson', 'wls'}
        Poisson likelihood or Neyman-weighted least squares.
    gamma_b : float, optional
        Fixed background decay rate for ``background='exponential'``; when
        omitted it is fitted, which makes it interchangeable with a component.
    select_components : bool
        Pick the component count by a likelihood-ratio test at ``alpha``.
    collapse_ratio : float
        Adjacent rates closer than this ratio are merged and refitted.
    """

    def __init__(self, n_components=1, fit_range=None, background="constant", irf_fwhm=None,
                 n_starts=8, parameterization="log", estimator="poisson", gamma_b=None,
                 select_components=False, alpha=0.01, collapse_ratio=1.05, tol=1e-7,
                 max_iter=1000):
        self.n_components = n_components
        self.fit_range = fit_range
        self.background = background
        self.irf_fwhm = irf_fwhm
        self.n_starts = n_starts
        self.parameterization = parameterization
        self.estimator = estimator
        self.gamma_b = gamma_b
        self.select_components = select_components
        self.alpha = alpha
        self.collapse_ratio = collapse_ratio
        self.tol = tol
        self.max_iter = max_iter

    def _check_params(self):
        if self.n_components not in (1, 2, 3):
            raise ValueError("n_components must be 1, 2 or 3")
        if self.n_starts < 8:
            raise ValueError("n_starts must be >= 8")
        if self.background not in BACKGROUNDS:
            raise ValueError(f"background must be one of {BACKGROUNDS}")
        if self.estimator not in ("poisson", "wls"):
            raise ValueError("estimator must be 'poisson' or 'wls'")
        if self.collapse_ratio < 1:
            raise ValueError("collapse_ratio must be >= 1")

    def _window(self, hist):
        t = hist.centers
        lo, hi = self.fit_range if self.fit_range is not None else (hist.bin_edges[0],
                                                                    hist.bin_edges[-1])
        if lo < hist.bin_edges[0] - 1e-12 or hi > hist.bin_edges[-1] + 1e-12 or hi <= lo:
            raise ValueError(f"fit range {(lo, hi)} outside histogram "
                             f"[{hist.bin_edges[0]}, {hist.bin_edges[-1]}]")
        sel = (t >= lo) & (t < hi)
        return t[sel], hist.counts[sel].astype(float)

    def _likelihood(self, hist, t, y, n):
        sigma = (self.irf_fwhm or 0.0) / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        return DecayLikelihood(t, y, hist.bin_width, n, self.background, sigma,
                               hist.rep_period, self.parameterization, self.gamma_b)

    def _fit_n(self, hist, t, y, n):
        lik = self._likelihood(hist, t, y, n)
        if np.count_nonzero(y) < 10 * lik.n_params:
            raise ValueError(
                f"need >= {10 * lik.n_params} non-empty bins for {lik.n_params} parameters, "
                f"have {np.count_nonzero(y)}")
        lower, upper = lik.bounds()
        span = t[-1] - t[0] + hist.bin_width
        best = None
        n_conv = 0
        exp_bg = lik.free_gamma_b
        for rates, gamma_b in _start_points(n, self.n_starts, span, hist.bin_width, exp_bg):
            if not exp_bg and self.background == "exponential":
                gamma_b = self.gamma_b
            amps = lik.initial_amplitudes(rates, gamma_b)
            p0 = np.concatenate([amps[:n], rates, amps[n:]])
            if exp_bg:
                p0 = np.concatenate([p0, [gamma_b]])
            if self.background != "none" and p0[2 * n] == 0:
                p0[2 * n] = 1e-3
            # a start whose components all vanish has no rate gradient
            p0[:n] = np.maximum(p0[:n], 1e-3 * max(y.max(), 1.0) / hist.bin_width)
            state = _lm.minimize(lik, y, lik.from_natural(p0), lower, upper, self.estimator,
                                 self.tol, self.max_iter)
            if not state.converged:
                continue
            n_conv += 1
            p = lik.to_natural(state.theta)
            key = (state.objective, _lexkey(_sorted_natural(p, n, exp_bg)))
            if best is None or key < best[0]:
                best = (key, state, p)
        if best is None:
            raise FitError(f"no start converged for the {n}-component model")
        _, state, p = best
        p = _sorted_natural(p, n, exp_bg)
        theta = lik.from_natural(p)
        fisher = lik.fisher(theta, self.estimator)
        try:
            cov = np.linalg.inv(fisher)
        except np.linalg.LinAlgError:
            cov = np.linalg.pinv(fisher)
        cov = 0.5 * (cov + cov.T)
        dof = max(y.size - lik.n_params, 1)
        result = FitResult(
            names=list(lik.names), values=p, covariance=cov,
            goodness=state.objective / dof, objective=state.objective,
            n_points=int(y.size), converged=True, n_starts_used=self.n_starts,
            n_converged=n_conv, n_iter=state.n_iter, estimator=self.estimator)
        return result

    def fit(self, hist: DecayHistogram, y=None):
        """Fit ``hist``; ``y`` is ignored (scikit-learn compatibility)."""
        self._check_params()
        if not isinstance(hist, DecayHistogram):
            raise TypeError("DecayFitter.fit expects a DecayHistogram")
        t, counts = self._window(hist)
        flags = []
        if self.select_components:
            crit = stats.chi2.ppf(1.0 - self.alpha, df=2)
            result = self._fit_n(hist, t, counts, 1)
            for n in range(2, self.n_components + 1):
                try:
                    candidate = self._fit_n(hist, t, counts, n)
                except (FitError, ValueError):
                    break
                if result.objective - candidate.objective <= crit:
                    break
                result = candidate
            flags.append("selected")
        else:
            result = self._fit_n(hist, t, counts, self.n_components)
        n = result.n_components
        while n > 1:
            rates = result.values[n:2 * n]
            if np.all(rates[:-1] / rates[1:] >= self.collapse_ratio):
                break
            warnings.warn(f"rates {rates} are degenerate (ratio < {self.collapse_ratio}); "
                          f"collapsing to {n - 1} components", stacklevel=2)
            flags.append("collapsed")
            n -= 1
            result = self._fit_n(hist, t, counts, n)
        result.flags = flags
        self.result_ = result
        self.model_ = result.to_decay_model(self.gamma_b)
        self.n_components_ = n
        self.rep_period_ = hist.rep_period
        return self

    def predict(self, t):
        """Fitted intensity ``I(t)`` in counts/ns (without IRF convolution)."""
        check_is_fitted(self, "model_")
        return self.model_(t)

    def expected_counts(self, hist: DecayHistogram):
        """Expected counts per bin under the fitted model, IRF included."""
        check_is_fitted(self, "result_")
        sigma = (self.irf_fwhm or 0.0) / (2.0 * math.sqrt(2.0 * math.log(2.0)))
        lik = DecayLikelihood(hist.centers, hist.counts, hist.bin_width, self.n_components_,
                              self.background, sigma, hist.rep_period, "linear", self.gamma_b)
        return lik.expected(self.result_.values, jac=False)[0]

    def score(self, hist: DecayHistogram, y=None):
        """Negative reduced deviance on ``hist`` (higher is better)."""
        check_is_fitted(self, "result_")
        t, counts = self._window(hist)
        mu = self.expected_counts(hist)[(hist.centers >= t[0]) & (hist.centers <= t[-1])]
        value, _, _ = _lm.objective_terms(counts, mu, None, "poisson")
        return -value / max(counts.size - self.result_.n_params, 1)


def _sorted_natural(p, n, exp_bg):
    """Order components by decreasing rate (ties: larger amplitude first)."""
    amps, rates = p[:n], p[n:2 * n]
    order = sorted(range(n), key=lambda i: (-rates[i], -amps[i]))
    out = p.copy()
    out[:n] = amps[order]
    out[n:2 * n] = rates[order]
    return out


def fit_decay(hist: DecayHistogram, n_components: int = 1, fit_range=None, **options):
    """Fit a decay histogram; returns ``(DecayModel, FitResult)``."""
    fitter = DecayFitter(n_components=n_components, fit_range=fit_range, **options).fit(hist)
    return fitter.model_, fitter.result_


def model_counts(model: DecayModel, hist: DecayHistogram, rng=None):
    """Expected (or, with ``rng``, Poisson-sampled) counts of ``model`` on ``hist``'s bins."""
    mu = hist.bin_width * model(hist.centers)
    if rng is None:
        return mu
    return rng.poisson(mu)


__all__ = ["DecayFitter", "DecayLikelihood", "DecayBasis", "fit_decay", "model_counts",
           "Background"]
