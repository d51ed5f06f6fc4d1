import numpy as np
import pytest

from flexmc.params import LigandSpec
from flexmc.receptor_noise import build_noise_model
from flexmc.stochastic_oracle import (compare, empirical_psd, empirical_stats,
                                      occupancy_stderr, simulate, simulate_replicas)

# several runs below are deliberately short
pytestmark = pytest.mark.filterwarnings("ignore:duration .* is short:RuntimeWarning")


def lig(rate_on, k_off, name="a"):
    return LigandSpec(name, rate_on, 1.0, k_off, 89.0)


def test_no_ligands_gives_zero_trajectory():
    tr = simulate([], 100, 1.0, 0.1, seed=1)
    assert tr.counts.shape == (11, 0)
    assert np.all(tr.total == 0)


def test_seeded_runs_are_identical():
    sp = [lig(10.0, 10.0)]
    a = simulate(sp, 200, 5.0, 0.01, seed=7)
    b = simulate(sp, 200, 5.0, 0.01, seed=7)
    assert np.array_equal(a.counts, b.counts)
    c = simulate(sp, 200, 5.0, 0.01, seed=8)
    assert not np.array_equal(a.counts, c.counts)


def test_per_species_counts_sum_to_total():
    tr = simulate([lig(2.0, 5.0, "a"), lig(4.0, 1.0, "b")], 300, 10.0, 0.01, seed=2)
    assert np.array_equal(tr.counts.sum(axis=1), tr.total)
    assert np.all(tr.total <= 300) and np.all(tr.counts >= 0)


def test_balanced_mean_occupancy():
    sp = [lig(10.0, 10.0)]
    tr = simulate(sp, 1000, 20.0, 0.01, seed=3)
    st = empirical_stats(tr)
    se = occupancy_stderr(0.5, 1000, st.n_eff)
    assert abs(st.p_hat - 0.5) <= 3 * se


def test_all_bound_limit():
    tr = simulate([lig(1e4, 1e-6)], 50, 2.0, 0.01, seed=4)
    st = empirical_stats(tr)
    assert st.p_hat == pytest.approx(1.0)
    assert st.var_hat == 0.0


def test_short_window_is_flagged():
    with pytest.warns(RuntimeWarning):
        tr = simulate([lig(0.1, 0.1)], 100, 5.0, 0.1, seed=5)
    assert empirical_stats(tr).short_window


def test_psd_requires_enough_samples():
    tr = simulate([lig(10.0, 10.0)], 100, 2.0, 0.1, seed=6)
    with pytest.raises(ValueError, match="samples"):
        empirical_psd(tr)


def test_psd_half_power_at_fitted_corner():
    sp = [lig(40.0, 10.0)]
    model = build_noise_model(sp, 500)
    tr = simulate(sp, 500, 400 * 1000 * model.tau_B / 100, model.tau_B / 20, seed=9)
    ps = empirical_psd(tr)
    assert ps.lorentzian(0.0) / ps.lorentzian(ps.corner) == pytest.approx(2.0)
    # the per-segment mean removal depresses the lowest bins, so the zero
    # frequency level is read from the fit and the corner level from the data
    at_corner = np.interp(ps.corner, ps.f, ps.psd)
    assert ps.plateau / at_corner == pytest.approx(2.0, rel=0.2)
    assert ps.fit_rms < 0.1


@pytest.mark.filterwarnings("ignore:Covariance of the parameters")
def test_white_noise_limit_is_flat():
    # relaxation much faster than the sampling interval; a flat spectrum has
    # no identifiable corner, so the Lorentzian fit is degenerate
    sp = [lig(1000.0, 1000.0)]
    tr = simulate(sp, 20, 20.0, 0.01, seed=10)
    ps = empirical_psd(tr)
    band = ps.psd[ps.f > 0]
    half = len(band) // 2
    assert band[:half].mean() == pytest.approx(band[half:].mean(), rel=0.2)


def test_replicas_are_independent_and_reproducible():
    sp = [lig(10.0, 10.0)]
    a = simulate_replicas(sp, 100, 2.0, 0.01, seed=11, replicas=3, threads=2)
    b = simulate_replicas(sp, 100, 2.0, 0.01, seed=11, replicas=3)
    assert all(np.array_equal(x.counts, y.counts) for x, y in zip(a, b))
    assert not np.array_equal(a[0].counts, a[1].counts)


def test_compare_report_keys():
    sp = [lig(10.0, 10.0)]
    rep = compare(sp, simulate(sp, 300, 10.0, 0.005, seed=12))
    for k in ("p_B", "p_hat", "p_stderr", "var_NB", "var_hat", "tau_B",
              "corner_analytic", "corner_fit"):
        assert k in rep


def test_single_sample_run_has_no_burn_in():
    tr = simulate([lig(0.001, 0.001)], 10, 1.0, 5.0, seed=13)
    assert len(tr.t) == 1
    assert empirical_stats(tr).p_hat == 0.0
