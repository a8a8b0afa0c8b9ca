import itertools
import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

import scenarios  # noqa: E402

from qdpcw.analysis import (BunchingEnvelope, G2Result, GroupIndexCurve,  # noqa: E402
                            PhotonBudget, background_for_purity, compute_budget, extract_beta,
                            extract_g2, extract_group_index, g2_from_purity, peak_areas)
from qdpcw.core import EmissionChannelSplit, solve_level_dynamics  # noqa: E402
from qdpcw.fitting import DecayFitter, FitResult, PeakFit  # noqa: E402
from qdpcw.sim import (build_coincidence_histogram, build_decay_histogram,  # noqa: E402
                       simulate_pulse_train, synthesize_fp_spectrum)
from qdpcw.sim.config import DetectionParams, ExperimentConfig  # noqa: E402
from qdpcw.types import CoincidenceHistogram  # noqa: E402


def peaks_at(wavelengths, sigma=0.0):
    return [PeakFit(float(w), 0.05, 100.0, 1.0, sigma) for w in wavelengths]


# group index


def test_uniform_comb_example():
    curve = extract_group_index(peaks_at([930.0, 931.0, 932.0]), l_b=10.0)
    assert list(curve.wavelength) == [931.0]
    assert curve.n_g[0] == pytest.approx(931.0**2 / (2 * 10_000 * 1.0), rel=1e-15)
    assert round(curve.n_g[0], 1) == 43.3


def test_doubling_length_halves_group_index():
    wl = [930.0, 930.7, 931.5, 932.1]
    a = extract_group_index(peaks_at(wl), l_b=10.0)
    b = extract_group_index(peaks_at(wl), l_b=20.0)
    np.testing.assert_allclose(b.n_g, a.n_g / 2, rtol=1e-15)


def _constant_comb(n_g, length, start=920.0, stop=940.0):
    # exact resonances of a dispersionless cavity: 2 n L / lambda = m + 1/2
    path = n_g * length * 1e3
    m = np.arange(math.ceil(2 * path / stop - 0.5), math.floor(2 * path / start - 0.5) + 1)
    return np.sort(2 * path / (m + 0.5))


def test_constant_path_gives_constant_index():
    curve = extract_group_index(peaks_at(_constant_comb(30.0, 20.0)), l_b=20.0)
    np.testing.assert_allclose(curve.n_g, 30.0, rtol=1e-4)


@given(st.floats(0.5, 2.0))
def test_wavelength_scaling(s):
    wl = _constant_comb(12.0, 15.0)
    a = extract_group_index(peaks_at(wl), l_b=15.0)
    b = extract_group_index(peaks_at(s * wl), l_b=15.0)
    # n = lambda^2 / (2 l dlambda) picks up s^2 / s
    np.testing.assert_allclose(b.n_g, s * a.n_g, rtol=1e-9)


def test_sigma_propagation():
    wl = np.array([930.0, 931.0, 932.0])
    curve = extract_group_index(peaks_at(wl, sigma=0.001), l_b=10.0)
    # dn/dlambda_{i+-1} = -+n/(2 dlambda), dn/dlambda_i = 2n/lambda
    n = curve.n_g[0]
    expected = math.sqrt(2 * (n / 2 * 0.001) ** 2 + (2 * n / 931.0 * 0.001) ** 2)
    assert curve.sigma[0] == pytest.approx(expected, rel=1e-9)


def test_red_section_round_trip():
    scene = scenarios.two_section_scene()
    from qdpcw.fitting import PeakFinder
    spectrum = synthesize_fp_spectrum(scene, 1)
    peaks = PeakFinder(window=0.1, wavelength_filter=(905.0, scenarios.RED_CUTOFF)).fit(
        spectrum).peaks_
    curve = extract_group_index(peaks, scenarios.L_BLUE, scenarios.L_RED, "red",
                                scenarios.blue_reference())
    np.testing.assert_allclose(curve.n_g, scenarios.n_red(curve.wavelength), rtol=0.05)
    assert curve.n_g.max() == pytest.approx(33, abs=2)


def test_blue_section_beyond_red_band_edge():
    # past the red cut-off the red section reflects and the cavity is blue alone
    scene = scenarios.two_section_scene()
    from qdpcw.fitting import PeakFinder
    spectrum = synthesize_fp_spectrum(scene, 0)
    peaks = PeakFinder(window=0.3, wavelength_filter=(931.0, 960.0)).fit(spectrum).peaks_
    curve = extract_group_index(peaks, scenarios.L_BLUE, section="blue")
    np.testing.assert_allclose(curve.n_g, scenarios.n_blue(curve.wavelength), rtol=0.01)


def test_group_index_errors():
    with pytest.raises(ValueError, match="at least 3"):
        extract_group_index(peaks_at([930.0, 931.0]), l_b=10.0)
    with pytest.raises(ValueError, match="reference"):
        extract_group_index(peaks_at([930.0, 931.0, 932.0]), 10.0, 10.0, section="red")
    ref = GroupIndexCurve(np.array([900.0, 920.0]), np.array([5.0, 5.5]), np.zeros(2), "blue")
    with pytest.raises(ValueError, match="931"):
        extract_group_index(peaks_at([930.0, 931.0, 932.0]), 10.0, 10.0, "red", ref)
    with pytest.raises(ValueError):
        GroupIndexCurve(np.array([900.0, 910.0]), np.array([0.5, 5.0]), np.zeros(2), "blue")
    with pytest.raises(ValueError):
        GroupIndexCurve(np.array([910.0, 900.0]), np.array([5.0, 5.0]), np.zeros(2), "blue")


def test_group_index_curve_round_trip():
    curve = extract_group_index(peaks_at([930.0, 930.9, 931.7, 932.4], 0.002), l_b=10.0)
    again = GroupIndexCurve.from_dict(curve.to_dict())
    np.testing.assert_array_equal(again.n_g, curve.n_g)
    np.testing.assert_array_equal(again.sigma, curve.sigma)
    assert again.section == "blue"


# beta


def fit_result(rate, sigma, converged=True):
    return FitResult(["amplitude_1", "rate_1", "b0"], [100.0, rate, 1.0],
                     np.diag([1.0, sigma**2, 0.01]), 1.0, 10.0, 100, converged)


def test_extract_beta_paper_values():
    r = extract_beta(fit_result(6.28, 0.15), fit_result(0.098, 0.001))
    assert abs(100 * r.beta - 98.43) <= 0.01
    assert abs(100 * r.beta_sigma - 0.04) <= 0.01
    assert 61.2 <= r.eta <= 64.2 and 1.2 <= r.eta_sigma <= 1.9
    assert r.provenance["coupled"]["parameters"]["rate_1"] == 6.28
    assert r.provenance["uncoupled"]["sigmas"]["rate_1"] == 0.001


def test_extract_beta_accepts_dicts_and_pairs():
    c, u = fit_result(6.28, 0.15), fit_result(0.098, 0.001)
    a = extract_beta(c, u)
    assert extract_beta(c.to_dict(), u.to_dict()) == a
    assert extract_beta((c.to_decay_model(), c), (u.to_decay_model(), u)) == a


def test_extract_beta_errors():
    with pytest.raises(ValueError, match="1.5.*1.5"):
        extract_beta(fit_result(1.5, 0.1), fit_result(1.5, 0.1))
    with pytest.raises(ValueError, match="converge"):
        extract_beta(fit_result(6.0, 0.1, converged=False), fit_result(0.1, 0.01))
    with pytest.raises(TypeError):
        extract_beta(6.28, 0.098)


@given(st.floats(0.2, 100.0), st.floats(0.01, 0.99), st.integers(-20, 20))
def test_extract_beta_scale_invariance(gamma_c, ratio, power):
    base = extract_beta(fit_result(gamma_c, 0.1), fit_result(gamma_c * ratio, 0.01))
    # powers of two rescale without rounding, so the result is bit-identical
    k = 2.0**power
    scaled = extract_beta(fit_result(k * gamma_c, 0.1), fit_result(k * gamma_c * ratio, 0.01))
    assert (scaled.beta, scaled.eta) == (base.beta, base.eta)


@given(st.floats(0.2, 100.0), st.floats(0.01, 0.99), st.floats(1e-3, 1e3))
def test_extract_beta_scale_invariance_any_factor(gamma_c, ratio, k):
    base = extract_beta(fit_result(gamma_c, 0.1), fit_result(gamma_c * ratio, 0.01))
    scaled = extract_beta(fit_result(k * gamma_c, 0.1), fit_result(k * gamma_c * ratio, 0.01))
    assert scaled.beta == pytest.approx(base.beta, rel=1e-13)
    assert scaled.eta == pytest.approx(base.eta, rel=1e-12)


@pytest.mark.slow
def test_closed_loop_beta_095():
    coupled = ExperimentConfig.from_splits(
        EmissionChannelSplit(5.7, 0.26, 0.03), gamma_nr_dark=0.03, gamma_bd=0.01, gamma_db=0.01,
        n_pulses=4 * 10**6, rng_seed=31, detection=DetectionParams(efficiency=2e-3))
    uncoupled = ExperimentConfig.from_splits(
        EmissionChannelSplit(0.02, 0.24, 0.03), gamma_nr_dark=0.03, gamma_bd=0.01, gamma_db=0.0,
        rep_rate=20.0, n_pulses=4 * 10**6, rng_seed=32)
    g_c = solve_level_dynamics(coupled.rates).eigenrates[0]
    g_uc = solve_level_dynamics(uncoupled.rates).eigenrates[0]
    truth = 1 - g_uc / g_c
    assert truth == pytest.approx(0.95, abs=1e-3)
    fits = []
    for cfg in (coupled, uncoupled):
        hist = build_decay_histogram(simulate_pulse_train(cfg), cfg)
        f = DecayFitter(n_components=2, irf_fwhm=0.1, select_components=True).fit(hist)
        fits.append((f.model_, f.result_))
    r = extract_beta(*fits)
    assert abs(r.beta - truth) <= 3 * r.beta_sigma


# g2


def _coincidences(areas, T=13.0, bins_per_period=10):
    """Histogram whose peaks hold the given areas, spread evenly over each period."""
    K = (len(areas) - 1) // 2
    width = T / bins_per_period
    counts = np.repeat(np.asarray(areas, dtype=np.int64) // bins_per_period, bins_per_period)
    edges = (np.arange(counts.size + 1) - counts.size / 2) * width
    assert np.isclose(edges[-1], (K + 0.5) * T)
    return CoincidenceHistogram(edges, counts, T)


def test_peak_areas_sum_each_period():
    coinc = _coincidences([10, 20, 30, 40, 50])
    delays, areas = peak_areas(coinc, 13.0)
    np.testing.assert_allclose(delays, [-26, -13, 0, 13, 26])
    np.testing.assert_array_equal(areas, [10, 20, 30, 40, 50])


def test_envelope_recovers_exact_parameters():
    tau = np.arange(1, 60) * 13.0
    area = 600 * np.exp(-tau / 200.0) + 400
    env = BunchingEnvelope().fit(np.concatenate([-tau, tau]), np.concatenate([area, area]))
    assert (env.amplitude_, env.tau_b_, env.offset_) == pytest.approx((600, 200, 400), rel=1e-6)
    assert isinstance(env.predict(13.0), float) or np.ndim(env.predict(13.0)) == 0


def test_g2_from_synthetic_areas():
    T = 13.0
    k = np.arange(-60, 61)
    areas = np.round(1e4 * (0.6 * np.exp(-np.abs(k) * T / 200.0) + 0.4) * 10)
    areas[60] = round(0.2 * (1e4 * (0.6 * np.exp(-T / 200.0) + 0.4)) * 10)
    result = extract_g2(_coincidences(areas, T), T)
    assert isinstance(result, G2Result) and not result.degraded
    assert result.g2_zero == pytest.approx(0.2, rel=1e-3)
    assert result.excitation_efficiency == pytest.approx(0.4, rel=1e-3)
    assert result.envelope["tau_b"] == pytest.approx(200.0, rel=1e-3)
    assert result.g2_zero == result.central_area / result.neighbor_area_fit


def test_g2_needs_twenty_side_peaks():
    with pytest.raises(ValueError, match="at least 20"):
        extract_g2(_coincidences([100] * 11), 13.0)


def test_flat_envelope_has_unit_efficiency():
    areas = np.full(61, 1000)
    areas[30] = 0
    result = extract_g2(_coincidences(areas), 13.0)
    assert result.g2_zero == 0.0
    assert result.excitation_efficiency == pytest.approx(1.0, abs=0.05)


def test_purity_formulas():
    assert g2_from_purity(0.894) == pytest.approx(0.200764, abs=1e-6)
    assert round(g2_from_purity(0.894), 2) == 0.20
    assert background_for_purity(1000.0, 0.8) == pytest.approx(250.0)
    with pytest.raises(ValueError):
        g2_from_purity(1.2)
    with pytest.raises(ValueError):
        background_for_purity(1000.0, 0.0)


def _g2_config(**kw):
    return ExperimentConfig.from_splits(
        EmissionChannelSplit(6.182, 0.058, 0.04), n_pulses=10**7, rng_seed=41,
        detection=DetectionParams(efficiency=0.3), **kw)


@pytest.mark.slow
def test_flat_envelope_simulation_gives_unit_efficiency():
    cfg = _g2_config()
    coinc = build_coincidence_histogram(simulate_pulse_train(cfg), cfg, window=2000.0)
    result = extract_g2(coinc, cfg.rep_period)
    assert result.g2_zero <= 0.02
    assert result.excitation_efficiency == pytest.approx(1.0, abs=0.05)


@pytest.mark.slow
@pytest.mark.xfail(strict=True, reason="a flat side-peak envelope carries no p_exc "
                   "information; C/(A+C) returns the blinking duty cycle (1 here)")
def test_no_blink_efficiency_equals_p_exc():
    cfg = _g2_config()
    coinc = build_coincidence_histogram(simulate_pulse_train(cfg), cfg, window=2000.0)
    result = extract_g2(coinc, cfg.rep_period)
    assert result.excitation_efficiency == pytest.approx(cfg.excitation_probability, rel=0.05)


@pytest.mark.slow
@pytest.mark.parametrize("purity", [0.8, 0.894, 0.95])
def test_background_purity_reproduces_one_minus_rho_squared(purity):
    cfg = _g2_config()
    photons = simulate_pulse_train(cfg)
    signal = photons.waveguide.time.size * cfg.detection.efficiency / 2 / (cfg.duration * 1e-9)
    cfg = cfg.replace(background_rate=background_for_purity(signal, purity))
    coinc = build_coincidence_histogram(photons, cfg, window=2000.0)
    assert extract_g2(coinc, cfg.rep_period).g2_zero == pytest.approx(
        g2_from_purity(purity), abs=0.03)


# budget


def test_budget_paper_chain():
    b = compute_budget(76.0, 0.984, 0.40)
    assert isinstance(b, PhotonBudget)
    assert b.waveguide_rate == pytest.approx(74.784e6, rel=1e-12)
    assert b.emitted_rate == pytest.approx(29.9136e6, rel=1e-12)
    assert b.detected_rate == pytest.approx(76e6 * 0.984 * 0.4 * 0.45 * 0.25 * 0.0315,
                                            rel=1e-12)
    names = [n for n, _ in b.stages]
    assert names[:2] == ["beta", "excitation"]
    assert b.cumulative()[-1][1] == pytest.approx(b.detected_rate, rel=1e-12)
    assert b.total_efficiency == pytest.approx(b.detected_rate / 76e6)
    assert b.to_dict()["kind"] == "budget"


def test_budget_variants():
    grating = compute_budget(76.0, 0.984, 0.4)
    taper = compute_budget(76.0, 0.984, 0.4, outcoupler="taper")
    assert taper.detected_rate == pytest.approx(2 * grating.detected_rate, rel=1e-12)
    high_na = compute_budget(76.0, 0.984, 0.4, lens_na=0.82)
    assert high_na.detected_rate == pytest.approx(grating.detected_rate * 0.70 / 0.45, rel=1e-12)
    prop = compute_budget(76.0, 0.984, 0.4, propagation_length=30.0)
    assert prop.detected_rate == pytest.approx(grating.detected_rate / math.e, rel=1e-12)
    gap = compute_budget(76.0, 0.984, 0.4, unmodeled_coupling=0.1)
    assert gap.detected_rate == pytest.approx(0.1 * grating.detected_rate, rel=1e-12)


@pytest.mark.parametrize("kw", [{"outcoupler": "prism"}, {"lens_na": 0.5}, {"beta": 1.2},
                                {"excitation_efficiency": 0.0}, {"setup_factors": [0.5, 1.5]},
                                {"propagation_length": -1.0}, {"rep_rate": 0.0}])
def test_budget_errors(kw):
    args = {"rep_rate": 76.0, "beta": 0.984, "excitation_efficiency": 0.4, **kw}
    with pytest.raises(ValueError):
        compute_budget(**args)


def test_budget_is_order_invariant():
    factors = [0.9, 0.5, 0.2, 0.35, 0.77, 0.123456789]
    rates = {compute_budget(76.0, 0.984, 0.4, setup_factors=list(p)).detected_rate
             for p in itertools.permutations(factors)}
    assert len(rates) == 1


@given(st.lists(st.floats(0.01, 0.99), min_size=1, max_size=6), st.data())
def test_budget_is_monotone(factors, data):
    i = data.draw(st.integers(0, len(factors) - 1))
    bigger = list(factors)
    bigger[i] = data.draw(st.floats(factors[i], 1.0).filter(lambda v: v > factors[i] * (1 + 1e-9)))
    lo = compute_budget(76.0, 0.9, 0.4, setup_factors=factors).detected_rate
    hi = compute_budget(76.0, 0.9, 0.4, setup_factors=bigger).detected_rate
    assert hi > lo
