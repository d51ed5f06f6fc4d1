"""Bound-receptor density -> stiffness, gate displacement, surface potential,
drain current, and the output-current noise spectrum."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .equilibrium import EquilibriumSolution, occupancy_fractions
from .params import (EPS0, KB, N_AVOGADRO, Q, DerivedDevice, DeviceConfig,
                     LinkSettings)
from .receptor_noise import (BindingNoiseModel, lorentzian_band_integral, psd_binding,
                             psd_plateau)

# exp() overflows a double just above this
_MAX_EXPONENT = 700.0


class SensitivityRangeError(OverflowError):
    def __init__(self, exponent: float):
        super().__init__(f"sensitivity exponent {exponent:.4g} out of range")
        self.exponent = exponent


@dataclass(frozen=True)
class BoundDensityVector:
    ns_target: float        # m^-2
    ns_interferer: float
    ns_sum: float

    def components(self) -> dict[str, float]:
        return {"target": self.ns_target, "interferer": self.ns_interferer,
                "sum": self.ns_sum}


@dataclass(frozen=True)
class ComponentResponse:
    ns: float
    dk: float       # N/m
    dy: float       # m
    dpsi: float     # V
    S: float
    I_drain: float  # mean drain current with this component bound (A)
    I_mean: float   # current attributed to this component (A), see transduce


@dataclass(frozen=True)
class TransducerResponse:
    target: ComponentResponse
    interferer: ComponentResponse
    sum: ComponentResponse


@dataclass(frozen=True)
class NoisePsd:
    grid: np.ndarray
    s_binding: np.ndarray
    s_flicker: np.ndarray
    s_total: np.ndarray
    sigma2_I: float
    sigma2_binding: float
    sigma2_flicker: float


# ---------------------------------------------------------------------------
# bridge from the equilibrium

def bound_densities(sol: EquilibriumSolution, P0: float,
                    P0_surface: float) -> BoundDensityVector:
    """Surface densities of bound receptors; species 0 is the target."""
    if not sol.PL:
        return BoundDensityVector(0.0, 0.0, 0.0)
    theta, _ = occupancy_fractions(sol, P0)
    nt = float(theta[0]) * P0_surface
    ni = math.fsum(theta[1:]) * P0_surface
    return BoundDensityVector(nt, ni, min(nt + ni, P0_surface))


def molecular_volume(mw: float, rho: float) -> float:
    """Volume of one molecule (m^3) from molecular weight (g/mol) and density (kg/m^3)."""
    if mw <= 0 or rho <= 0:
        raise ValueError("mw and rho must be > 0")
    return (mw / 1000.0) / (N_AVOGADRO * rho)


# ---------------------------------------------------------------------------
# electromechanics

def stiffness_change(ns: float, MV: float, H: float, k_stiff: float) -> float:
    return k_stiff * 3.0 * ns * MV / H


def gate_displacement(ns: float, MV: float, cfg: DeviceConfig,
                      dev: DerivedDevice, factor3: bool = False) -> float:
    """Mean change of the gate position (m) near the pull-in operating point.

    ``factor3`` keeps the 3 that appears when the relative stiffness change
    is substituted into the force balance; off reproduces the usual
    closed form without it.
    """
    y = cfg.y_op
    lever = 3.0 * y - cfg.y0
    rad = (EPS0 * dev.A * (dev.VG - cfg.psi_s) ** 2 / (2.0 * lever)
           * ns * MV / (cfg.H * dev.k_stiff))
    if factor3:
        rad *= 3.0
    if rad < 0:
        raise ArithmeticError(f"negative radicand {rad!r} in gate displacement")
    return math.sqrt(rad)


def gate_displacement_quadratic(dk: float, cfg: DeviceConfig,
                                dev: DerivedDevice) -> float:
    """Positive root of the full force-balance quadratic in the displacement.

    ``(3y - y0) dy^2 + y (3y - 2 y0) dy = eps0 A (VG - psi_s)^2 / 2 * dk / k^2``
    """
    y = cfg.y_op
    a = 3.0 * y - cfg.y0
    b = y * (3.0 * y - 2.0 * cfg.y0)
    c = -EPS0 * dev.A * (dev.VG - cfg.psi_s) ** 2 / 2.0 * dk / dev.k_stiff**2
    if abs(b) < 1e-30 * max(abs(a), 1.0):
        return math.sqrt(-c / a)
    disc = b * b - 4.0 * a * c
    return (-b + math.sqrt(disc)) / (2.0 * a)


def _charge_scale(cfg: DeviceConfig, dev: DerivedDevice, mode: str) -> float:
    """``eps_s * NA * A`` with eps_s as relative constant or in F/m."""
    eps = cfg.eps_s / EPS0 if mode == "relative" else cfg.eps_s
    return eps * cfg.NA * dev.A


def surface_potential_shift(dk: float, dy: float, cfg: DeviceConfig,
                            dev: DerivedDevice,
                            permittivity: str = "relative") -> float:
    num = -dev.k_stiff * dy + dk * (cfg.y0 - cfg.y_op)
    return num / (Q * _charge_scale(cfg, dev, permittivity))


def sensitivity_exponent(dk: float, dy: float, cfg: DeviceConfig,
                         dev: DerivedDevice,
                         permittivity: str = "relative") -> float:
    num = dev.k_stiff * dy - dk * (cfg.y0 - cfg.y_op)
    return num / (KB * cfg.T * _charge_scale(cfg, dev, permittivity))


def sensitivity(dk: float, dy: float, cfg: DeviceConfig, dev: DerivedDevice,
                permittivity: str = "relative") -> float:
    """Drain-current ratio before/after binding."""
    x = sensitivity_exponent(dk, dy, cfg, dev, permittivity)
    if abs(x) > _MAX_EXPONENT:
        raise SensitivityRangeError(x)
    return math.exp(x)


def respond(ns: float, MV: float, cfg: DeviceConfig, dev: DerivedDevice,
            opts: LinkSettings) -> ComponentResponse:
    dk = stiffness_change(ns, MV, cfg.H, dev.k_stiff)
    dy = gate_displacement(ns, MV, cfg, dev, opts.displacement_factor3)
    dpsi = surface_potential_shift(dk, dy, cfg, dev, opts.permittivity)
    S = sensitivity(dk, dy, cfg, dev, opts.permittivity)
    i_drain = cfg.IDS1 / S
    if opts.current_mode == "ratio":
        i_mean = i_drain
    else:
        # current change produced by the bound molecules, IDS1 (1 - 1/S)
        x = sensitivity_exponent(dk, dy, cfg, dev, opts.permittivity)
        i_mean = abs(cfg.IDS1 * math.expm1(-x))
    return ComponentResponse(ns=ns, dk=dk, dy=dy, dpsi=dpsi, S=S,
                             I_drain=i_drain, I_mean=i_mean)


def transduce(bdv: BoundDensityVector, MV: float, cfg: DeviceConfig,
              dev: DerivedDevice, opts: LinkSettings | None = None
              ) -> TransducerResponse:
    """Run the chain independently for the target, interferer and total densities.

    The total is pushed through the full nonlinear chain rather than formed
    by adding component currents.
    """
    opts = opts or LinkSettings()
    return TransducerResponse(
        target=respond(bdv.ns_target, MV, cfg, dev, opts),
        interferer=respond(bdv.ns_interferer, MV, cfg, dev, opts),
        sum=respond(bdv.ns_sum, MV, cfg, dev, opts))


def single_ligand_dpsi(MV: float, cfg: DeviceConfig, dev: DerivedDevice,
                       opts: LinkSettings | None = None) -> float:
    """Surface-potential shift caused by one molecule bound on the gate."""
    opts = opts or LinkSettings()
    ns = 1.0 / dev.A
    dk = stiffness_change(ns, MV, cfg.H, dev.k_stiff)
    dy = gate_displacement(ns, MV, cfg, dev, opts.displacement_factor3)
    return surface_potential_shift(dk, dy, cfg, dev, opts.permittivity)


# ---------------------------------------------------------------------------
# noise

def transconductance(I: float, cfg: DeviceConfig) -> float:
    """Subthreshold gm = q I / (m kB T)."""
    return Q * I / (cfg.m_ideality * KB * cfg.T)


def flicker_coefficient(I: float, cfg: DeviceConfig, dev: DerivedDevice) -> float:
    """``f * S_flicker(f)`` (A^2), the frequency-independent flicker prefactor."""
    g = transconductance(I, cfg)
    kT_eV = KB * cfg.T / Q      # traps are counted per eV
    mob = 1.0 + cfg.alpha_s * cfg.mu_p * dev.Cox * (dev.VG - abs(cfg.VTH))
    return (cfg.lambda_tun * kT_eV * Q**2 * cfg.Not * g**2
            / (cfg.W * cfg.L * dev.Cox**2) * mob**2)


def flicker_psd(f, I: float, cfg: DeviceConfig, dev: DerivedDevice):
    f = np.asarray(f, dtype=float)
    if np.any(f == 0):
        raise ValueError("flicker PSD is undefined at f = 0")
    out = flicker_coefficient(I, cfg, dev) / np.abs(f)
    return float(out) if out.ndim == 0 else out


def integrate_log(func: Callable[[np.ndarray], np.ndarray], f_lo: float,
                  f_hi: float, per_decade: int = 64, rtol: float = 1e-8,
                  max_per_decade: int = 1 << 16) -> float:
    """Integrate ``func(f) df`` over [f_lo, f_hi] on a logarithmic grid.

    Composite Simpson in ln f, doubling the density from ``per_decade``
    until two successive estimates agree to ``rtol``.
    """
    if not 0 < f_lo < f_hi:
        raise ValueError("need 0 < f_lo < f_hi")
    decades = math.log10(f_hi / f_lo)
    prev = None
    n = per_decade
    while True:
        m = max(2, int(math.ceil(decades * n)))
        m += m % 2
        u = np.linspace(math.log(f_lo), math.log(f_hi), m + 1)
        f = np.exp(u)
        y = func(f) * f
        h = (u[-1] - u[0]) / m
        est = h / 3.0 * (y[0] + y[-1] + 4.0 * y[1:-1:2].sum() + 2.0 * y[2:-1:2].sum())
        if prev is not None and abs(est - prev) <= rtol * abs(est):
            return float(est)
        if n >= max_per_decade:
            return float(est)
        prev = est
        n *= 2


def log_grid(f_lo: float, f_hi: float, points: int) -> np.ndarray:
    return np.logspace(math.log10(f_lo), math.log10(f_hi), points)


def total_noise(model: BindingNoiseModel, response: TransducerResponse,
                dpsi_single: float, cfg: DeviceConfig, dev: DerivedDevice,
                grid: np.ndarray | None = None,
                gm_current: str = "sum") -> NoisePsd:
    """Binding plus flicker noise of the output current and its band variance.

    The variance is twice the one-sided band integral (two-sided spectrum,
    even integrand).
    """
    if not 0 < cfg.f_min < cfg.f_max:
        raise ValueError("invalid noise band")
    I = response.sum.I_drain if gm_current == "sum" else cfg.IDS1
    g = transconductance(I, cfg)
    scale_b = (dpsi_single * g) ** 2

    if model.degenerate:
        def s_b(f):
            return np.zeros_like(f)
    else:
        def s_b(f):
            return psd_binding(model, f) * scale_b

    def s_f(f):
        return flicker_psd(f, I, cfg, dev)

    var_b = 2.0 * integrate_log(s_b, cfg.f_min, cfg.f_max) if not model.degenerate else 0.0
    var_f = 2.0 * integrate_log(s_f, cfg.f_min, cfg.f_max) if cfg.Not > 0 else 0.0
    if grid is None:
        grid = log_grid(cfg.f_min, cfg.f_max, 200)
    grid = np.asarray(grid, dtype=float)
    sb = np.atleast_1d(s_b(grid))
    sf = np.atleast_1d(s_f(grid))
    return NoisePsd(grid=grid, s_binding=sb, s_flicker=sf, s_total=sb + sf,
                    sigma2_I=var_b + var_f, sigma2_binding=var_b,
                    sigma2_flicker=var_f)


def binding_band_variance(model: BindingNoiseModel, scale: float,
                          f_lo: float, f_hi: float) -> float:
    """Closed-form two-sided binding variance over the band (A^2)."""
    return 2.0 * scale * lorentzian_band_integral(psd_plateau(model), model.tau_B,
                                                  f_lo, f_hi)
