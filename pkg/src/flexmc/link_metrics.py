"""Weight-shift-keying link metrics: per-symbol output statistics, the two
SNR definitions, Gaussian ML thresholds and symbol error probability."""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import erfc

from .equilibrium import EquilibriumProblem, EquilibriumSolution, solve_iterative
from .params import Config, LigandSpec, derive_device
from .receptor_noise import BindingNoiseModel, build_noise_model
from .transducer import (NoisePsd, TransducerResponse, bound_densities,
                         molecular_volume, single_ligand_dpsi, total_noise,
                         transduce)


@dataclass(frozen=True)
class WskSymbol:
    mw: float               # g/mol
    target_conc: float      # m^-3


@dataclass(frozen=True)
class WskAlphabet:
    symbols: tuple[WskSymbol, ...]
    interferers: tuple[LigandSpec, ...]
    target: LigandSpec

    @property
    def M(self) -> int:
        return len(self.symbols)


@dataclass(frozen=True)
class SymbolStats:
    mu_I_target: float
    mu_I_interferer: float
    mu_I_sum: float
    sigma2: float
    # diagnostics
    S_sum: float = 1.0
    equilibrium: EquilibriumSolution | None = None
    noise_model: BindingNoiseModel | None = None
    response: TransducerResponse | None = None
    noise: NoisePsd | None = None

    def moments(self, variant: str) -> tuple[float, float]:
        """(mean, variance) seen by the detector under ``sep1`` or ``sep2``."""
        if variant == "sep1":
            return self.mu_I_sum, self.sigma2
        if variant == "sep2":
            return self.mu_I_target, self.sigma2 + self.mu_I_interferer**2
        raise ValueError(f"unknown variant {variant!r}")


@dataclass(frozen=True)
class DecisionThresholds:
    lam: tuple[float, ...]


@dataclass(frozen=True)
class SepResult:
    value: float
    clamped: bool


def build_alphabet(bits: int, mw_min: float, mw_max: float, conc: float,
                   interferers: Sequence[LigandSpec] = (),
                   target: LigandSpec | None = None,
                   mw_list: Sequence[float] | None = None) -> WskAlphabet:
    """2**bits molecules with weights evenly spaced over [mw_min, mw_max]."""
    if bits not in (1, 2):
        raise ValueError("bits must be 1 or 2")
    M = 2**bits
    if mw_list is not None:
        mws = [float(m) for m in mw_list]
        if len(mws) != M:
            raise ValueError(f"need {M} molecular weights, got {len(mws)}")
    else:
        if not mw_min < mw_max:
            raise ValueError("need mw_min < mw_max")
        mws = list(np.linspace(mw_min, mw_max, M))
    if any(b <= a for a, b in zip(mws, mws[1:])):
        raise ValueError("molecular weights must be strictly increasing")
    if target is None:
        from .params import TABLE1_K_OFF, TABLE1_K_ON
        target = LigandSpec("target", conc, TABLE1_K_ON, TABLE1_K_OFF, mws[0], "target")
    return WskAlphabet(symbols=tuple(WskSymbol(float(m), conc) for m in mws),
                       interferers=tuple(interferers), target=target)


def alphabet_from_config(cfg: Config, bits: int | None = None) -> WskAlphabet:
    target = cfg.target
    if target is None:
        raise ValueError("configuration has no target ligand")
    link = cfg.link
    return build_alphabet(bits or link.bits, link.mw_min, link.mw_max,
                          target.conc0, cfg.interferers, target=target,
                          mw_list=link.mw_list if (bits or link.bits) == link.bits else None)


def symbol_ligands(sym: WskSymbol, alphabet: WskAlphabet) -> list[LigandSpec]:
    """Target first, then interferers, all carrying the symbol's weight."""
    t = dataclasses.replace(alphabet.target, conc0=sym.target_conc, mw=sym.mw)
    return [t] + [dataclasses.replace(i, mw=sym.mw) for i in alphabet.interferers]


def solve_symbol_equilibrium(ligands: Sequence[LigandSpec], cfg: Config
                             ) -> tuple[EquilibriumProblem, EquilibriumSolution]:
    # occupancy-fraction form: one unit of receptor, concentrations scaled
    c = cfg.link.receptor_conc
    prob = EquilibriumProblem(1.0, tuple(l.conc0 / c for l in ligands),
                              tuple(l.K / c for l in ligands))
    return prob, solve_iterative(prob, cfg.link.tol, cfg.link.max_iter)


def evaluate_ligands(ligands: Sequence[LigandSpec], mw: float, cfg: Config,
                     grid: np.ndarray | None = None) -> SymbolStats:
    dev_cfg = cfg.device
    dev = derive_device(dev_cfg)
    opts = cfg.link
    prob, sol = solve_symbol_equilibrium(ligands, cfg)
    bdv = bound_densities(sol, prob.P0, dev_cfg.P0_surface)
    MV = molecular_volume(mw, dev_cfg.rho_ligand)
    resp = transduce(bdv, MV, dev_cfg, dev, opts)
    model = build_noise_model(ligands, dev.NR, opts.psd_normalization)
    dpsi1 = single_ligand_dpsi(MV, dev_cfg, dev, opts)
    noise = total_noise(model, resp, dpsi1, dev_cfg, dev, grid=grid,
                        gm_current=opts.gm_current)
    return SymbolStats(mu_I_target=resp.target.I_mean,
                       mu_I_interferer=resp.interferer.I_mean,
                       mu_I_sum=resp.sum.I_mean, sigma2=noise.sigma2_I,
                       S_sum=resp.sum.S, equilibrium=sol, noise_model=model,
                       response=resp, noise=noise)


def evaluate_symbol(sym: WskSymbol, alphabet: WskAlphabet, cfg: Config,
                    grid: np.ndarray | None = None) -> SymbolStats:
    """Equilibrium -> densities -> transducer -> noise for one symbol."""
    return evaluate_ligands(symbol_ligands(sym, alphabet), sym.mw, cfg, grid)


def evaluate_alphabet(alphabet: WskAlphabet, cfg: Config) -> list[SymbolStats]:
    return [evaluate_symbol(s, alphabet, cfg) for s in alphabet.symbols]


# ---------------------------------------------------------------------------
# SNR

def snr1(stats: SymbolStats) -> float:
    """Signal power of the total current over the intrinsic noise."""
    return stats.mu_I_sum**2 / stats.sigma2


def snr2(stats: SymbolStats) -> float:
    """Target current over intrinsic noise plus interferer current power."""
    return stats.mu_I_target**2 / (stats.sigma2 + stats.mu_I_interferer**2)


def to_db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else -math.inf


# ---------------------------------------------------------------------------
# detection

def equal_likelihood_point(mu_a: float, var_a: float, mu_b: float,
                           var_b: float) -> float:
    """Crossing of two Gaussian densities between their means (mu_a < mu_b).

    When the wider density dominates over the whole interval there is no
    crossing; the point at equal z-scores, mu_a + d sa/(sa + sb), is
    returned instead.
    """
    if not mu_a < mu_b:
        raise ValueError("means must be strictly increasing")
    if not (var_a > 0 and var_b > 0):
        raise ValueError("variances must be positive")
    d = mu_b - mu_a
    # log-density difference in t = (x - mu_a)/d; scale-free, so extreme
    # variance ratios do not overflow
    va, vb = var_a / d**2, var_b / d**2
    if math.isclose(va, vb, rel_tol=1e-12):
        return 0.5 * (mu_a + mu_b)
    half_log = 0.25 * (math.log(var_b) - math.log(var_a))

    def g(t: float) -> float:
        return 2.0 * half_log - t * t / (2.0 * va) + (t - 1.0) ** 2 / (2.0 * vb)

    if g(0.0) > 0.0 > g(1.0):
        t = brentq(g, 0.0, 1.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    else:
        sa, sb = math.sqrt(var_a), math.sqrt(var_b)
        t = sa / (sa + sb)
    return mu_a + d * t


def ml_thresholds(means: Sequence[float], variances: Sequence[float]) -> DecisionThresholds:
    """Thresholds between consecutive symbols of increasing mean."""
    if len(means) != len(variances) or len(means) < 2:
        raise ValueError("need at least two symbols with matching variances")
    lam = [equal_likelihood_point(means[i], variances[i], means[i + 1], variances[i + 1])
           for i in range(len(means) - 1)]
    return DecisionThresholds(tuple(lam))


def variant_moments(stats: Sequence[SymbolStats], variant: str
                    ) -> tuple[np.ndarray, np.ndarray]:
    mv = np.array([s.moments(variant) for s in stats], dtype=float)
    return mv[:, 0], mv[:, 1]


def sep_from_moments(means: Sequence[float], variances: Sequence[float],
                     thresholds: DecisionThresholds) -> SepResult:
    """Symbol error probability of interval decoding, equiprobable symbols."""
    mu = np.asarray(means, dtype=float)
    sd = np.sqrt(np.asarray(variances, dtype=float))
    lam = thresholds.lam
    M = len(mu)
    if M < 2 or len(lam) != M - 1:
        raise ValueError("need M >= 2 symbols and M-1 thresholds")
    r2 = math.sqrt(2.0)
    total = erfc((lam[0] - mu[0]) / (sd[0] * r2))
    total += erfc((mu[M - 1] - lam[M - 2]) / (sd[M - 1] * r2))
    for m in range(1, M - 1):
        total += erfc((mu[m] - lam[m - 1]) / (sd[m] * r2))
        total += erfc((lam[m] - mu[m]) / (sd[m] * r2))
    p = float(total) / (2.0 * M)
    clamped = not 0.0 <= p <= 1.0
    return SepResult(min(max(p, 0.0), 1.0), clamped)


def sep(stats: Sequence[SymbolStats], variant: str = "sep1") -> SepResult:
    """SEP of an alphabet under ``sep1`` (total current) or ``sep2`` (target only).

    Symbols are ranked by their detector mean first, so alphabets whose
    current falls with molecular weight are handled the same way.
    """
    mu, var = variant_moments(stats, variant)
    order = np.argsort(mu, kind="stable")
    mu, var = mu[order], var[order]
    if np.any(np.diff(mu) <= 0):
        # indistinguishable symbols: every decision is a guess
        M = len(mu)
        return SepResult(1.0 - 1.0 / M, False)
    return sep_from_moments(mu, var, ml_thresholds(mu, var))


def monte_carlo_sep(means: Sequence[float], variances: Sequence[float],
                    thresholds: DecisionThresholds, n: int,
                    rng: np.random.Generator) -> tuple[float, float]:
    """Empirical interval-decoding error rate and its standard error."""
    mu = np.asarray(means, dtype=float)
    sd = np.sqrt(np.asarray(variances, dtype=float))
    edges = np.asarray(thresholds.lam)
    errors = 0
    for m in range(len(mu)):
        x = rng.normal(mu[m], sd[m], size=n)
        errors += int(np.count_nonzero(np.searchsorted(edges, x) != m))
    total = n * len(mu)
    p = errors / total
    return p, math.sqrt(max(p * (1 - p), 1.0 / total) / total)
