import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.special import erfc

from flexmc.link_metrics import (DecisionThresholds, SymbolStats, alphabet_from_config,
                                 build_alphabet, equal_likelihood_point,
                                 evaluate_alphabet, evaluate_ligands, ml_thresholds,
                                 monte_carlo_sep, sep, sep_from_moments, snr1, snr2)
from flexmc.params import preset, set_value


def ratio_cfg():
    return set_value(preset("table1"), "link.current_mode", "ratio")


def test_alphabet_weights():
    assert [s.mw for s in build_alphabet(1, 89, 763, 1.0).symbols] == [89, 763]
    mws = [s.mw for s in build_alphabet(2, 89, 763, 1.0).symbols]
    assert mws == pytest.approx([89, 313.6666667, 538.3333333, 763])
    with pytest.raises(ValueError):
        build_alphabet(1, 89, 89, 1.0)
    with pytest.raises(ValueError):
        build_alphabet(3, 89, 763, 1.0)


def test_no_interferer_limit():
    cfg = ratio_cfg()
    cfg = dataclasses.replace(cfg, ligands=(cfg.target,))
    st_ = evaluate_ligands(cfg.ligands, 89.0, cfg)
    assert st_.mu_I_interferer == cfg.device.IDS1
    assert st_.mu_I_sum == st_.mu_I_target


def test_symmetric_interferer():
    cfg = preset("table1")
    c = set_value(cfg, "interferers.conc0", cfg.target.conc0)
    st_ = evaluate_ligands(c.ligands, 89.0, c)
    # species are updated in turn, so the symmetry holds to solver tolerance
    assert st_.mu_I_target == pytest.approx(st_.mu_I_interferer, rel=1e-9)


def test_zero_target():
    cfg = set_value(ratio_cfg(), "ligand[0].conc0", 0.0)
    st_ = evaluate_ligands(cfg.ligands, 89.0, cfg)
    assert st_.mu_I_target == cfg.device.IDS1
    assert st_.response.target.S == 1.0


def stats(mu_t, mu_i, mu_s, var):
    return SymbolStats(mu_I_target=mu_t, mu_I_interferer=mu_i, mu_I_sum=mu_s, sigma2=var)


def test_snr_arithmetic():
    s = stats(1e-9, 1e-10, 2e-9, 1e-20)
    assert snr1(s) == pytest.approx(4e2)
    assert snr2(stats(2e-9, 0.0, 2e-9, 1e-20)) == snr1(stats(2e-9, 0.0, 2e-9, 1e-20))
    a, b = stats(1e-9, 1e-10, 2e-9, 1e-20), stats(1e-9, 2e-10, 2e-9, 1e-20)
    assert snr2(b) < snr2(a) and snr1(b) == snr1(a)


def test_threshold_examples():
    assert equal_likelihood_point(0, 1, 2, 1) == 1.0
    c = 7.5
    assert equal_likelihood_point(0, c**2, c, c**2) == pytest.approx(
        c * equal_likelihood_point(0, 1, 1, 1))
    lam = equal_likelihood_point(0, 1, 3, 4)
    root = [r.real for r in np.roots([0.5 - 0.125, 0.75, -1.125 - math.log(2)])
            if 0 < r.real < 3][0]
    assert lam == pytest.approx(root, rel=1e-12)
    # brute-force likelihood scan on a 1e-4 grid
    x = np.arange(0, 3, 1e-4)
    la = -0.5 * x**2
    lb = -math.log(2) - (x - 3) ** 2 / 8
    assert abs(x[np.argmin(np.abs(la - lb))] - lam) < 2e-4


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(1e-6, 1e3), st.floats(1e-3, 1e3), st.floats(1e-3, 1e3))
def test_threshold_lies_between_means(mu, d, sa, sb):
    lam = equal_likelihood_point(mu, sa**2, mu + d, sb**2)
    assert mu <= lam <= mu + d


def test_threshold_survives_extreme_variance_ratio():
    lam = equal_likelihood_point(0.0, 1e-40, 1.0, 1e40)
    assert 0.0 <= lam <= 1.0


def test_sep_closed_form_cases():
    half = sep_from_moments([0.0, 0.0], [1.0, 1.0], DecisionThresholds((0.0,)))
    assert half.value == 0.5
    q1 = sep_from_moments([0.0, 2.0], [1.0, 1.0], DecisionThresholds((1.0,)))
    assert q1.value == pytest.approx(erfc(1 / math.sqrt(2)) / 2, abs=1e-15)
    assert q1.value == pytest.approx(0.15866, abs=1e-5)
    far = sep_from_moments([0.0, 1e3], [1.0, 1.0], DecisionThresholds((500.0,)))
    assert far.value == 0.0


def test_sep_ties_are_guesses():
    s = [stats(1.0, 0.0, 1.0, 1.0)] * 4
    assert sep(s, "sep1").value == 0.75


def test_sep_orders_by_mean():
    up = [stats(m, 0.0, m, 1.0) for m in (0.0, 2.0)]
    assert sep(up[::-1]).value == sep(up).value


@pytest.mark.parametrize("M", [2, 4])
def test_monte_carlo_agrees(M):
    mu = np.arange(M) * 2.5
    var = np.linspace(0.8, 1.6, M) ** 2
    lam = ml_thresholds(mu, var)
    p = sep_from_moments(mu, var, lam).value
    mc, se = monte_carlo_sep(mu, var, lam, 200_000, np.random.default_rng(3))
    assert abs(mc - p) <= 3 * se


def test_alphabet_evaluation_two_bit_worse():
    cfg = preset("table1")
    one = sep(evaluate_alphabet(alphabet_from_config(cfg, 1), cfg)).value
    two = sep(evaluate_alphabet(alphabet_from_config(cfg, 2), cfg)).value
    assert 0 <= one <= two <= 1
