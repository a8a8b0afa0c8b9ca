import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from qdpcw.core import (GAMMA_HOM, GAMMA_NR, Background, BetaResult, DecayModel,
                        EmissionChannelSplit, ModeDataEntry, ModeDataTable, RateSet,
                        beta_from_channels, beta_from_measured, beta_monte_carlo,
                        composite_rates, cooperativity, example_mode_table_path,
                        max_beta_by_position, purcell_scale, radiative_rate_from_fit,
                        rates_from_mode_data, read_mode_table, solve_level_dynamics,
                        write_mode_table)

rate = st.floats(min_value=0.0, max_value=1e3, allow_nan=False)
positive = st.floats(min_value=1e-3, max_value=1e3, allow_nan=False)


def rate_sets(min_value=0.0):
    r = st.floats(min_value=min_value, max_value=1e3, allow_nan=False)
    return st.builds(RateSet, r, r, r, r, r, r)


# composite rates and the rate set


def test_composite_rates_examples():
    gf_x, _, _ = composite_rates(RateSet(gamma_rad_bright_x=6.15, gamma_nr_bright=0.03,
                                         gamma_bd=0.1))
    assert gf_x == pytest.approx(6.28, abs=1e-12)
    assert composite_rates(RateSet(gamma_nr_dark=0.02, gamma_db=0.01))[2] == pytest.approx(0.03)
    assert composite_rates(RateSet()) == (0.0, 0.0, 0.0)


@pytest.mark.parametrize("bad", [-1.0, math.nan, math.inf])
def test_rate_set_rejects_invalid(bad):
    with pytest.raises(ValueError):
        RateSet(gamma_bd=bad)


def test_channel_split_rejects_negative():
    with pytest.raises(ValueError):
        EmissionChannelSplit(1.0, -0.1, 0.0)


# level dynamics


def test_decoupled_branch_is_single_exponential():
    dyn = solve_level_dynamics(RateSet(gamma_rad_bright_x=2.5, gamma_nr_bright=0.5),
                               initial_bright=1.0, initial_dark=0.0)
    assert dyn.eigenrates[0] == 3.0
    t = np.linspace(0, 5, 11)
    np.testing.assert_allclose(dyn.bright(t), np.exp(-3.0 * t), rtol=1e-14)


def test_paper_rates_give_nearby_eigenrates():
    # gamma_f = 6.28 and gamma_s = 0.098 with both spin flips at 0.01
    rates = RateSet(gamma_rad_bright_x=6.25, gamma_nr_bright=0.02, gamma_bd=0.01,
                    gamma_nr_dark=0.088, gamma_db=0.01)
    dyn = solve_level_dynamics(rates)
    matrix = np.array([[-6.28, 0.01], [0.01, -0.098]])
    oracle = np.sort(-np.linalg.eigvals(matrix))[::-1]
    np.testing.assert_allclose(dyn.eigenrates, oracle, rtol=1e-13)
    assert abs(dyn.eigenrates[0] - 6.28) < 1e-4
    assert abs(dyn.eigenrates[1] - 0.098) < 1e-4


@given(rate_sets(), st.sampled_from("XY"))
def test_trace_and_determinant_identities(rates, axis):
    gf_x, gf_y, gs = composite_rates(rates)
    gf = gf_x if axis == "X" else gf_y
    r1, r2 = solve_level_dynamics(rates, dipole_axis=axis).eigenrates
    trace, det = gf + gs, gf * gs - rates.gamma_bd * rates.gamma_db
    assert r1 + r2 == pytest.approx(trace, rel=1e-12, abs=1e-300)
    assert r1 * r2 == pytest.approx(det, rel=1e-12, abs=1e-300)
    assert r1 >= r2 >= 0


def _matrix(rates, axis="X"):
    gf_x, gf_y, gs = composite_rates(rates)
    gf = gf_x if axis == "X" else gf_y
    return np.array([[-gf, rates.gamma_db], [rates.gamma_bd, -gs]])


@given(rate_sets(min_value=1e-2), st.floats(0, 0.5), st.floats(0, 0.5))
def test_populations_match_matrix_exponential(rates, b0, d0):
    dyn = solve_level_dynamics(rates, b0, d0)
    M = _matrix(rates)
    scale = max(abs(b0), abs(d0), 1e-300)
    for t in (0.0, 0.01, 0.3, 2.0):
        b, d = expm(M * t) @ np.array([b0, d0])
        assert dyn.bright(t) == pytest.approx(b, abs=1e-9 * scale)
        assert dyn.dark(t) == pytest.approx(d, abs=1e-9 * scale)


def test_degenerate_branch_matches_ode():
    # equal diagonal rates and no coupling in one direction: secular term
    rates = RateSet(gamma_rad_bright_x=0.9, gamma_nr_bright=0.0, gamma_bd=0.1,
                    gamma_nr_dark=1.0, gamma_db=0.0)
    dyn = solve_level_dynamics(rates, 0.3, 0.2)
    assert dyn.eigenrates[0] == dyn.eigenrates[1]
    sol = solve_ivp(lambda t, y: _matrix(rates) @ y, (0, 8), [0.3, 0.2], rtol=1e-11,
                    atol=1e-13, dense_output=True)
    t = np.linspace(0, 8, 17)
    np.testing.assert_allclose(dyn.bright(t), sol.sol(t)[0], atol=1e-9)
    np.testing.assert_allclose(dyn.dark(t), sol.sol(t)[1], atol=1e-9)


@given(rate_sets(min_value=1e-2), st.floats(0, 0.5), st.floats(0, 0.5),
       st.floats(0, 20))
def test_population_is_conserved(rates, b0, d0, t):
    dyn = solve_level_dynamics(rates, b0, d0)
    total = dyn.bright(t) + dyn.dark(t) + dyn.decayed(t)
    assert total == pytest.approx(b0 + d0, abs=1e-9)


def test_level_dynamics_rejects_bad_populations():
    with pytest.raises(ValueError):
        solve_level_dynamics(RateSet(gamma_rad_bright_x=1.0), -0.1, 0.2)
    with pytest.raises(ValueError):
        solve_level_dynamics(RateSet(gamma_rad_bright_x=1.0), 0.7, 0.7)
    with pytest.raises(ValueError):
        solve_level_dynamics(RateSet(gamma_rad_bright_x=1.0), dipole_axis="Z")


# beta factor


def test_beta_from_channels_examples():
    assert beta_from_channels(EmissionChannelSplit(6.15, 0.068, 0.030)) == pytest.approx(
        (6.248 - 0.098) / 6.248, rel=1e-12)
    assert round(beta_from_channels(EmissionChannelSplit(6.15, 0.068, 0.030)), 4) == 0.9843
    assert beta_from_channels(EmissionChannelSplit(1, 0, 0)) == 1.0
    assert beta_from_channels(EmissionChannelSplit(0, 1, 1)) == 0.0
    with pytest.raises(ValueError):
        beta_from_channels(EmissionChannelSplit(0, 0, 0))


def test_beta_from_measured_paper_values():
    r = beta_from_measured(6.28, 0.098, 0.15, 0.001)
    assert isinstance(r, BetaResult)
    assert round(100 * r.beta, 2) == pytest.approx(98.44, abs=1e-9)
    assert abs(100 * r.beta - 98.43) <= 0.01
    assert r.beta_sigma == pytest.approx(4.0e-4, rel=0.02)
    assert 61.2 <= r.eta <= 64.2
    assert 1.2 <= r.eta_sigma <= 1.9


def test_beta_from_measured_trivial_and_errors():
    r = beta_from_measured(2.0, 1.0)
    assert (r.beta, r.beta_sigma, r.eta) == (0.5, 0.0, 1.0)
    with pytest.raises(ValueError, match="below coupled"):
        beta_from_measured(1.0, 1.0)
    with pytest.raises(ValueError):
        beta_from_measured(0.0, 0.1)
    with pytest.raises(ValueError):
        beta_from_measured(1.0, 0.1, -0.1)


def test_first_order_sigma_matches_monte_carlo():
    r = beta_from_measured(6.28, 0.098, 0.15, 0.001)
    beta_std, _ = beta_monte_carlo(6.28, 0.098, 0.15, 0.001, n_samples=100_000, seed=1)
    assert r.beta_sigma == pytest.approx(beta_std, rel=0.10)


@given(positive, positive, positive)
def test_channel_and_measured_beta_agree(wg, rad, nr):
    split = EmissionChannelSplit(wg, rad, nr)
    r = beta_from_measured(split.total, rad + nr)
    assert r.beta == pytest.approx(beta_from_channels(split), rel=1e-12, abs=1e-15)
    assert r.beta == 1 - (rad + nr) / split.total or r.beta == pytest.approx(
        1 - (rad + nr) / split.total, rel=1e-12, abs=1e-15)


@given(st.floats(0, 0.999), st.floats(0, 0.999))
def test_cooperativity_is_monotone(a, b):
    if a < b:
        assert cooperativity(a) < cooperativity(b)
    assert cooperativity(0.5) == 1.0


def test_cooperativity_domain():
    with pytest.raises(ValueError):
        cooperativity(1.0)


@given(positive, positive, positive, st.floats(1e-3, 10))
def test_beta_increases_with_guided_rate(wg, rad, nr, extra):
    assert (beta_from_channels(EmissionChannelSplit(wg + extra, rad, nr))
            > beta_from_channels(EmissionChannelSplit(wg, rad, nr)))


# mode data and scaling


def test_rates_from_mode_data():
    split = rates_from_mode_data(ModeDataEntry(0, 0, "X", 5, 0.0, 1.0))
    assert (split.gamma_wg, split.gamma_rad, split.gamma_nr) == (0.0, 0.91, 0.03)
    assert beta_from_channels(split) == 0.0
    assert (GAMMA_HOM, GAMMA_NR) == (0.91, 0.030)
    split = rates_from_mode_data(ModeDataEntry(0, 0, "Y", 58, 9.86, 0.05))
    assert split.total == pytest.approx(9.86 * 0.91 + 0.05 * 0.91 + 0.03, rel=1e-12)
    assert split.total == pytest.approx(9.05, abs=0.01)
    oracle = 9.86 * 0.91 / (9.86 * 0.91 + 0.05 * 0.91 + 0.03)
    assert beta_from_channels(split) == pytest.approx(oracle, rel=1e-12)
    assert beta_from_channels(split) == pytest.approx(0.991, abs=1e-3)
    with pytest.raises(ValueError):
        rates_from_mode_data(ModeDataEntry(0, 0, "X", 5, 1, 1), gamma_hom=0)


def test_purcell_scale():
    assert purcell_scale(58, 58, 5.0) == 5.0
    assert purcell_scale(58, 5, 0.5) == pytest.approx(5.8, rel=1e-12)
    with pytest.raises(ValueError):
        purcell_scale(58, 0, 1.0)
    with pytest.raises(ValueError):
        purcell_scale(0.5, 5, 1.0)
    slow = EmissionChannelSplit(purcell_scale(58, 5, 0.5), 0.1, 0.03)
    fast = EmissionChannelSplit(0.5, 0.1, 0.03)
    assert beta_from_channels(slow) > beta_from_channels(fast)


def test_radiative_rate_from_fit():
    assert radiative_rate_from_fit(6.28, 0.098) == pytest.approx(6.182, abs=1e-12)
    assert radiative_rate_from_fit(1.0, 0.0) == 1.0
    with pytest.raises(ValueError):
        radiative_rate_from_fit(0.5, 0.5)


def test_example_mode_table_round_trip(tmp_path):
    table = read_mode_table(example_mode_table_path())
    assert len(table) > 0 and table.lattice_constant == 240.0
    path = tmp_path / "modes.csv"
    write_mode_table(table, path)
    again = read_mode_table(path)
    assert again == table
    best = max_beta_by_position(table)
    assert 0 <= min(best.values()) and max(best.values()) < 1


@pytest.mark.parametrize("row, message", [
    ("300,0,X,5,1,1", "outside the unit cell"),
    ("0,0,X,0.5,1,1", "group index"),
    ("0,0,X,5,-1,1", "power ratios"),
    ("0,0,Z,5,1,1", "axis"),
    ("0,0,X,5,1", "expected 6 fields"),
    ("0,0,X,five,1,1", "could not convert"),
])
def test_mode_table_errors_name_the_line(tmp_path, row, message):
    path = tmp_path / "bad.csv"
    path.write_text("# lattice_constant_nm=240\nx_nm,y_nm,axis,n_g,p_wg_ratio,p_rad_ratio\n"
                    f"0,0,X,5,1,1\n{row}\n")
    with pytest.raises(ValueError, match=message) as info:
        read_mode_table(path)
    assert ":4" in str(info.value)


def test_mode_table_needs_lattice_constant(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("x_nm,y_nm,axis,n_g,p_wg_ratio,p_rad_ratio\n0,0,X,5,1,1\n")
    with pytest.raises(ValueError, match="lattice constant"):
        read_mode_table(path)
    assert len(read_mode_table(path, lattice_constant=240)) == 1
    with pytest.raises(ValueError):
        ModeDataTable((), 0.0)


# decay model


def test_decay_model_orders_components():
    model = DecayModel(((1.0, 0.1), (2.0, 5.0), (3.0, 5.0)), Background(1.0, 2.0, 0.5))
    assert list(model.rates) == [5.0, 5.0, 0.1]
    assert list(model.amplitudes) == [3.0, 2.0, 1.0]
    assert model(0.0) == pytest.approx(9.0)
    assert DecayModel.from_dict(model.to_dict()) == model


@pytest.mark.parametrize("components", [((-1.0, 1.0),), ((1.0, 0.0),), ((1, 1),) * 4])
def test_decay_model_rejects_invalid(components):
    with pytest.raises(ValueError):
        DecayModel(components)
