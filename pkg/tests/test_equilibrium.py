import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flexmc.equilibrium import (BALANCE_RTOL, ConvergenceError, EquilibriumProblem,
                                bound_probability, occupancy_fractions, residual,
                                solve_bisection, solve_iterative)

GOLDEN_PL = (3 - math.sqrt(5)) / 2
GOLDEN_FREE = (math.sqrt(5) - 1) / 2
SYM_FREE = math.sqrt(2) - 1
SYM_PL = 1 - 1 / math.sqrt(2)


def prob(P0, *pairs):
    return EquilibriumProblem.from_pairs(P0, pairs)


def test_empty_system():
    sol = solve_iterative(prob(1.0))
    assert sol.P_free == 1.0 and sol.PL == () and sol.iterations == 1


@pytest.mark.parametrize("solver", [solve_iterative, solve_bisection])
def test_golden_ratio(solver):
    sol = solver(prob(1.0, (1.0, 1.0)))
    assert sol.PL[0] == pytest.approx(GOLDEN_PL, abs=1e-12)
    assert sol.P_free == pytest.approx(GOLDEN_FREE, abs=1e-12)
    assert sol.L_free[0] == pytest.approx(GOLDEN_FREE, abs=1e-12)


@pytest.mark.parametrize("solver", [solve_iterative, solve_bisection])
def test_symmetric_pair(solver):
    sol = solver(prob(1.0, (1.0, 1.0), (1.0, 1.0)))
    assert sol.P_free == pytest.approx(SYM_FREE, abs=1e-12)
    assert sol.PL[0] == pytest.approx(SYM_PL, abs=1e-12)
    assert sol.PL[1] == pytest.approx(SYM_PL, abs=1e-12)


def test_residual_examples():
    p = prob(1.0, (1.0, 1.0))
    assert residual(p, 0.0) == 1.0
    assert abs(residual(p, GOLDEN_FREE)) < 1e-12
    assert residual(prob(2.0, (1.0, 3.0), (5.0, 0.1)), 2.0) <= 0


def test_no_receptor():
    sol = solve_iterative(prob(0.0, (1.0, 1.0)))
    assert sol.P_free == 0.0 and sol.PL == (0.0,)


def test_saturating_limit():
    sol = solve_iterative(prob(1.0, (1e9, 1e-9)))
    assert sol.P_free < 1e-15
    assert sol.PL[0] == pytest.approx(1.0, abs=1e-12)
    _, total = occupancy_fractions(sol, 1.0)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_occupancy_fractions():
    theta, total = occupancy_fractions(solve_iterative(prob(1.0, (1.0, 1.0))), 1.0)
    assert theta[0] == pytest.approx(GOLDEN_PL, abs=1e-12)
    assert occupancy_fractions(solve_iterative(prob(1.0)), 1.0)[1] == 0.0
    with pytest.raises(ZeroDivisionError):
        occupancy_fractions(solve_iterative(prob(0.0, (1.0, 1.0))), 0.0)


def test_bound_probability():
    assert bound_probability([1.0], [1.0])[0] == 0.5
    assert bound_probability([], [])[0] == 0.0
    pb, pj = bound_probability([1.0, 3.0], [1.0, 1.0])
    assert pb == pytest.approx(0.8) and pj == pytest.approx([0.2, 0.6])


def test_invalid_problems():
    with pytest.raises(ValueError):
        prob(-1.0, (1.0, 1.0))
    with pytest.raises(ValueError):
        prob(1.0, (1.0, 0.0))
    with pytest.raises(ValueError):
        prob(1.0, (-1.0, 1.0))
    with pytest.raises(ValueError):
        residual(prob(1.0), -1.0)


def test_max_iter_reports_partial_solution():
    p = prob(1.0, *[(1.0, 0.01 * (j + 1)) for j in range(6)])
    with pytest.raises(ConvergenceError) as info:
        solve_iterative(p, max_iter=1, accelerate=False)
    assert info.value.solution.iterations == 1


def test_plain_sweep_converges_without_acceleration():
    p = prob(1.0, (2.0, 0.5), (0.3, 0.2), (5.0, 3.0))
    a = solve_iterative(p, accelerate=False)
    b = solve_bisection(p)
    assert a.P_free == pytest.approx(b.P_free, rel=1e-9)


problems = st.builds(
    lambda P0, pairs: EquilibriumProblem.from_pairs(P0, pairs),
    st.floats(1e-3, 1e3),
    st.lists(st.tuples(st.floats(1e-3, 1e3), st.floats(1e-3, 1e3)), max_size=10))


@settings(max_examples=300, deadline=None)
@given(problems)
def test_iterative_matches_bisection(p):
    a, b = solve_iterative(p), solve_bisection(p)
    assert a.P_free == pytest.approx(b.P_free, rel=1e-8)
    assert abs(a.residual) <= 1e-10 * p.P0
    # receptor conservation and bounds
    assert all(0 <= c <= min(l, p.P0) * (1 + 1e-12) for c, l in zip(a.PL, p.L0))
    assert a.P_free + math.fsum(a.PL) == pytest.approx(p.P0, rel=1e-10)


@settings(max_examples=100, deadline=None)
@given(problems, st.randoms(use_true_random=False))
def test_species_order_does_not_matter(p, rnd):
    idx = list(range(p.n))
    rnd.shuffle(idx)
    q = EquilibriumProblem(p.P0, tuple(p.L0[i] for i in idx), tuple(p.K[i] for i in idx))
    a, b = solve_iterative(p), solve_iterative(q)
    assert a.P_free == pytest.approx(b.P_free, rel=1e-8)
    for j, i in enumerate(idx):
        assert b.PL[j] == pytest.approx(a.PL[i], rel=1e-7, abs=1e-12 * p.P0)


def test_balance_tolerance_is_sane():
    assert 0 < BALANCE_RTOL <= 1e-8


def test_free_ligand_complements_complex():
    p = prob(1.0, (0.3, 0.7), (2.0, 0.05))
    sol = solve_iterative(p)
    for l0, c, lf in zip(p.L0, sol.PL, sol.L_free):
        assert c + lf == pytest.approx(l0, rel=1e-10)
    assert np.all(np.asarray(sol.L_free) >= 0)


@pytest.mark.parametrize("p", [
    # pool and ligand matched with tight binding: the quadratic's discriminant
    # must not cancel
    EquilibriumProblem(82.0, (82.0,), (0.001,)),
    # saturated identical species: plain sweeps contract very slowly
    EquilibriumProblem(820.9539758837649, (637.2436742591085,) * 3, (1 / 3,) * 3),
    EquilibriumProblem(680.0798825402954, (633.8776172662796, 628.11481080002,
                                           805.3047440596555),
                       (327.938226599118, 0.001, 48.172078538102824)),
])
def test_hard_cases_converge_quickly(p):
    a = solve_iterative(p, max_iter=100)
    assert a.P_free == pytest.approx(solve_bisection(p).P_free, rel=1e-10)
