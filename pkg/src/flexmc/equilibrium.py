"""Competitive binding equilibrium of one receptor with n ligand species.

Two independent solvers are provided. :func:`solve_iterative` is the
species-by-species quadratic sweep (each species re-equilibrated against the
receptor pool left by the others); :func:`solve_bisection` brackets the
root of the scalar free-receptor balance and serves as its oracle.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np


# attainable relative accuracy of the free receptor after a ten-species
# sweep in double precision; the balance guard never asks for more
BALANCE_RTOL = 1e-10


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, solution: "EquilibriumSolution"):
        super().__init__(msg)
        self.solution = solution


class ConsistencyError(RuntimeError):
    """Raised when an internal invariant that valid inputs guarantee fails."""


@dataclass(frozen=True)
class EquilibriumProblem:
    P0: float
    L0: tuple[float, ...]
    K: tuple[float, ...]

    def __post_init__(self):
        if len(self.L0) != len(self.K):
            raise ValueError("L0 and K must have the same length")
        if not self.P0 >= 0:
            raise ValueError("P0 must be >= 0")
        if any(not l >= 0 for l in self.L0):
            raise ValueError("every L0 must be >= 0")
        if any(not k > 0 for k in self.K):
            raise ValueError("every K must be > 0")

    @classmethod
    def from_pairs(cls, P0: float, species: Sequence[tuple[float, float]]):
        return cls(float(P0), tuple(float(l) for l, _ in species),
                   tuple(float(k) for _, k in species))

    @property
    def n(self) -> int:
        return len(self.L0)


@dataclass(frozen=True)
class EquilibriumSolution:
    P_free: float
    PL: tuple[float, ...]
    L_free: tuple[float, ...]
    iterations: int
    residual: float

    def as_dict(self) -> dict:
        return {"P_free": self.P_free, "PL": list(self.PL),
                "L_free": list(self.L_free), "iterations": self.iterations,
                "residual": self.residual}


def residual(problem: EquilibriumProblem, x: float) -> float:
    """Free-receptor balance ``P0 - x - sum L0_j x/(x+K_j)``; zero at equilibrium."""
    if x < 0:
        raise ValueError("x must be >= 0")
    bound = math.fsum(l * x / (x + k) for l, k in zip(problem.L0, problem.K))
    return problem.P0 - x - bound


def _pair_equilibrium(R: float, L0: float, K: float) -> tuple[float, float]:
    """Receptor pool R against one ligand: returns (free receptor, complex).

    Both roots are evaluated in cancellation-free form so that either
    quantity keeps full relative precision when it is tiny.
    """
    if R == 0.0 or L0 == 0.0:
        return R, 0.0
    b = R + L0 + K
    # b^2 - 4 R L0 written as a sum of non-negative terms (no cancellation
    # when R ~ L0 and K is small)
    disc = (R - L0) ** 2 + K * (K + 2.0 * (R + L0))
    if not disc >= 0:
        raise ConsistencyError(f"invalid discriminant {disc!r}")
    pl = 2.0 * R * L0 / (b + math.sqrt(disc))
    c = L0 - R + K
    d2 = c * c + 4.0 * K * R
    if c >= 0:
        x = 2.0 * K * R / (c + math.sqrt(d2))
    else:
        x = 0.5 * (math.sqrt(d2) - c)
    return x, pl


def _sweep(problem: EquilibriumProblem, pl: list[float],
           p_avail: float) -> tuple[list[float], float, float]:
    """One pass over the species in order; returns (complexes, free, max change)."""
    out = list(pl)
    change = 0.0
    for j in range(problem.n):
        pool = p_avail + out[j]
        p_avail, new = _pair_equilibrium(pool, problem.L0[j], problem.K[j])
        change = max(change, abs(new - out[j]))
        out[j] = new
    return out, p_avail, change


def solve_iterative(problem: EquilibriumProblem, tol: float = 1e-12,
                    max_iter: int = 1_000_000,
                    accelerate: bool = True) -> EquilibriumSolution:
    """Sweep the species, re-solving each two-component quadratic in turn.

    The receptor pool seen by species j is the current free receptor plus
    whatever j held before the update. Stops when no complex moved by more
    than ``tol * P0`` during a full sweep, the free receptor moved by less
    than ``tol`` relative to itself, and the receptor balance residual is
    consistent with that accuracy. (Slowly contracting problems can show a
    tiny per-sweep change while still far from the root.)

    Saturated multi-species problems contract by a factor close to one per
    sweep, so with ``accelerate`` each sweep is followed by a Newton
    correction of the free receptor on the balance residual, kept inside a
    bracket that the residual signs maintain. The complexes are then reset
    to the values that free receptor implies. Once the balance holds, plain
    sweeps take over, and convergence is only ever declared on one.
    """
    if tol <= 0 or max_iter < 1:
        raise ValueError("need tol > 0 and max_iter >= 1")
    P0 = problem.P0
    n = problem.n
    scale = max(P0, np.finfo(float).tiny)
    pl = [0.0] * n
    p_avail = p_last = P0
    lo, hi = 0.0, P0            # bracket of the free receptor
    it = 0
    while True:
        it += 1
        new, p_new, change = _sweep(problem, pl, p_avail)
        pl, p_avail = new, p_new
        if (change <= tol * scale and abs(p_new - p_last) <= tol * p_new
                and _balanced(problem, p_new, max(tol, BALANCE_RTOL))):
            break
        p_last = p_new
        if it >= max_iter:
            sol = _finish(problem, p_avail, pl, it)
            raise ConvergenceError(
                f"no convergence after {it} sweeps (last change {change:.3e},"
                f" residual {sol.residual:.3e})", sol)
        if not accelerate or n < 2 or not 0.0 < p_new < P0:
            continue
        if _balanced(problem, p_new, tol):
            # the root is resolved; further resets would only fight the
            # rounding floor of the sweep itself
            continue
        x = _newton_step(problem, p_new, lo, hi)
        if x is None:
            continue
        lo, hi, x = x
        pl = [l * x / (x + k) for l, k in zip(problem.L0, problem.K)]
        p_avail = x
    return _finish(problem, p_avail, pl, it)


def _newton_step(problem: EquilibriumProblem, x: float, lo: float,
                 hi: float) -> tuple[float, float, float] | None:
    """Tightened bracket and the safeguarded Newton iterate from ``x``.

    The balance residual is convex and decreasing in the free receptor, so
    the tangent root never overshoots from the left. Falls back to the
    bracket's geometric (or arithmetic) midpoint when it leaves the bracket.
    """
    r = residual(problem, x)
    if r == 0.0:
        return None
    if r > 0:
        lo = max(lo, x)
    else:
        hi = min(hi, x)
    slope = 1.0 + math.fsum(l * k / (x + k) ** 2
                            for l, k in zip(problem.L0, problem.K))
    xn = x + r / slope
    if not lo < xn < hi:
        xn = math.sqrt(lo * hi) if lo > 0 else 0.5 * (lo + hi)
    return lo, hi, xn


def _balanced(problem: EquilibriumProblem, x: float, tol: float) -> bool:
    """True when the Newton correction implied by the balance residual is
    below ``tol`` relative to x (or at the rounding floor of the residual)."""
    r = residual(problem, x)
    slope = 1.0 + math.fsum(l * k / (x + k) ** 2
                            for l, k in zip(problem.L0, problem.K))
    floor = 64.0 * np.finfo(float).eps * (problem.P0 + x)
    return abs(r) <= max(tol * x * slope, floor)


def _finish(problem, p_free, pl, it) -> EquilibriumSolution:
    l_free = tuple(l * k / (p_free + k) if l > 0 else 0.0
                   for l, k in zip(problem.L0, problem.K))
    # free ligand from the converged complex where that is better conditioned
    l_free = tuple(max(l0 - c, 0.0) if c < 0.5 * l0 else lf
                   for l0, c, lf in zip(problem.L0, pl, l_free))
    return EquilibriumSolution(P_free=p_free, PL=tuple(pl), L_free=l_free,
                               iterations=it,
                               residual=residual(problem, p_free))


def solve_bisection(problem: EquilibriumProblem,
                    tol: float = 1e-14) -> EquilibriumSolution:
    """Bracket the free-receptor root on [0, P0] and recover the complexes.

    The balance is strictly decreasing in x, so the bracket never fails.
    Terminates once the bracket width is below ``tol`` relative to its
    upper end (or it can no longer shrink in floating point).
    """
    P0 = problem.P0
    if P0 == 0.0 or problem.n == 0:
        x = P0
    else:
        lo, hi = 0.0, P0
        for it in range(5000):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            if residual(problem, mid) > 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= tol * hi:
                break
        x = 0.5 * (lo + hi)
    pl = [l * x / (x + k) for l, k in zip(problem.L0, problem.K)]
    l_free = [l * k / (x + k) for l, k in zip(problem.L0, problem.K)]
    return EquilibriumSolution(P_free=x, PL=tuple(pl), L_free=tuple(l_free),
                               iterations=0, residual=residual(problem, x))


def occupancy_fractions(sol: EquilibriumSolution, P0: float) -> tuple[np.ndarray, float]:
    """Per-species bound fraction ``PL_j / P0`` and their sum."""
    if P0 <= 0:
        raise ZeroDivisionError("occupancy fractions undefined for P0 = 0")
    theta = np.asarray(sol.PL, dtype=float) / P0
    return theta, float(min(theta.sum(), 1.0))


def bound_probability(L0: Sequence[float], K: Sequence[float]) -> tuple[float, np.ndarray]:
    """Bound probability of one receptor under constant ligand levels.

    Returns ``(p_B, p_Bj)`` where ``p_Bj = (L0_j/K_j) / (1 + sum L0/K)``.
    """
    r = np.asarray(L0, dtype=float) / np.asarray(K, dtype=float)
    denom = 1.0 + r.sum()
    p_j = r / denom
    return float(r.sum() / denom), p_j
