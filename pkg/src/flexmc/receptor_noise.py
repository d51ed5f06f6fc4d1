"""Binding-noise statistics of a receptor population under ligand competition.

Receptors are independent two-state units; with n competing species the
bound fraction, its binomial variance, the relaxation time and the
Lorentzian spectrum of the bound count follow from the per-species
concentrations and rate constants.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .equilibrium import bound_probability
from .params import LigandSpec


class DegenerateModelError(ValueError):
    """Autocorrelation/PSD requested for a model with no binding kinetics."""


@dataclass(frozen=True)
class BindingNoiseModel:
    p_B: float
    p_Bj: tuple[float, ...]
    NR: float
    var_NB: float
    k_on_total: float       # 1/s
    k_off_total: float      # 1/s
    tau_B: float            # s; inf when degenerate
    normalization: str = "as_printed"

    @property
    def degenerate(self) -> bool:
        return not math.isfinite(self.tau_B)


def build_noise_model(species: Sequence[LigandSpec], NR: float,
                      normalization: str = "as_printed") -> BindingNoiseModel:
    if NR < 1:
        raise ValueError("NR must be >= 1")
    if normalization not in ("as_printed", "fourier_pair"):
        raise ValueError(f"unknown normalization {normalization!r}")
    L0 = [s.conc0 for s in species]
    K = [s.K for s in species]
    p_b, p_j = bound_probability(L0, K)
    k_on = math.fsum(s.k_on * s.conc0 for s in species)
    # unbinding weighted by the occupancy of each species
    k_off = math.fsum(p * s.k_off for p, s in zip(p_j, species))
    rate = k_on + k_off
    tau = 1.0 / rate if rate > 0 else math.inf
    return BindingNoiseModel(p_B=p_b, p_Bj=tuple(float(p) for p in p_j), NR=NR,
                             var_NB=p_b * (1.0 - p_b) * NR, k_on_total=k_on,
                             k_off_total=k_off, tau_B=tau,
                             normalization=normalization)


def _check(model: BindingNoiseModel) -> None:
    if model.degenerate:
        raise DegenerateModelError("no ligand kinetics: relaxation time is infinite")


def autocorrelation(model: BindingNoiseModel, lag) -> np.ndarray | float:
    """Exponentially decaying autocovariance of the bound count."""
    _check(model)
    lag = np.asarray(lag, dtype=float)
    if np.any(lag < 0):
        raise ValueError("lag must be >= 0")
    out = model.var_NB * np.exp(-lag / model.tau_B)
    return float(out) if out.ndim == 0 else out


def psd_plateau(model: BindingNoiseModel) -> float:
    """Zero-frequency level of the bound-count PSD."""
    _check(model)
    if model.normalization == "fourier_pair":
        return 2.0 * model.tau_B * model.var_NB
    return model.var_NB / (2.0 * model.tau_B)


def psd_binding(model: BindingNoiseModel, f) -> np.ndarray | float:
    """Lorentzian PSD of the bound count at frequency ``f`` (Hz, two-sided)."""
    s0 = psd_plateau(model)
    f = np.asarray(f, dtype=float)
    out = s0 / (1.0 + (2.0 * np.pi * f * model.tau_B) ** 2)
    return float(out) if out.ndim == 0 else out


def corner_frequency(model: BindingNoiseModel) -> float:
    _check(model)
    return 1.0 / (2.0 * np.pi * model.tau_B)


def lorentzian_band_integral(plateau: float, tau: float, f_lo: float,
                             f_hi: float) -> float:
    """Closed-form integral of ``plateau / (1 + (2 pi f tau)^2)`` over [f_lo, f_hi]."""
    w = 2.0 * np.pi * tau
    return plateau / w * (math.atan(w * f_hi) - math.atan(w * f_lo))


def total_psd_integral(model: BindingNoiseModel) -> float:
    """Integral of the bound-count PSD over the whole real line."""
    return lorentzian_band_integral(psd_plateau(model), model.tau_B,
                                    -math.inf, math.inf)
