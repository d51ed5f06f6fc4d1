"""Event-driven simulation of a receptor population under competing ligands.

Each of the N_R receptors is free or bound to one species. A free receptor
binds species j at rate k_j+ [L_j]0 and a j-bound receptor releases at rate
k_j-. Ligand levels are held fixed (no depletion). Only the per-species
bound counts are tracked, so the cost scales with the number of events and
not with N_R.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import curve_fit
from scipy.signal import welch

from .params import LigandSpec
from .receptor_noise import build_noise_model

_BLOCK = 4096


@dataclass(frozen=True)
class ReceptorTrajectory:
    t: np.ndarray               # sample times (s)
    counts: np.ndarray          # (samples, species) bound counts
    seed: int | None
    NR: int
    tau_B: float = math.inf     # analytic relaxation time, for windowing
    events: int = 0

    @property
    def total(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else math.nan


@dataclass(frozen=True)
class EmpiricalStats:
    p_hat: float
    var_hat: float
    p_hat_j: tuple[float, ...]
    n_eff: float
    short_window: bool = False


@dataclass(frozen=True)
class EmpiricalPsd:
    f: np.ndarray
    psd: np.ndarray
    plateau: float
    corner: float               # fitted Lorentzian corner (Hz)
    fit_rms: float              # RMS log10 residual of the fit
    extras: dict = field(default_factory=dict)

    def lorentzian(self, f) -> np.ndarray:
        return _lorentzian(np.asarray(f, dtype=float), self.plateau, self.corner)


def simulate(species: Sequence[LigandSpec], NR: int, duration: float,
             sample_dt: float, seed: int | np.random.SeedSequence | None = None,
             initial: Sequence[int] | None = None) -> ReceptorTrajectory:
    """Exact stochastic simulation sampled on the grid 0, dt, 2 dt, ...

    The population starts all free unless ``initial`` gives bound counts.
    """
    NR = int(NR)
    if NR < 1:
        raise ValueError("NR must be >= 1")
    if not (duration > 0 and sample_dt > 0):
        raise ValueError("duration and sample_dt must be positive")
    n = len(species)
    model = build_noise_model(species, NR) if n else None
    tau = model.tau_B if model is not None else math.inf
    if math.isfinite(tau) and duration < 100 * tau:
        warnings.warn(f"duration {duration:g} s is short compared with the "
                      f"relaxation time {tau:g} s", RuntimeWarning, stacklevel=2)
    n_samples = int(math.floor(duration / sample_dt + 1e-9)) + 1
    grid = np.arange(n_samples) * sample_dt
    out = np.zeros((n_samples, n), dtype=np.int64)
    seed_val = seed if isinstance(seed, (int, type(None))) else None
    if n == 0:
        return ReceptorTrajectory(grid, out, seed_val, NR, tau)

    rng = np.random.default_rng(seed)
    on = [s.k_on * s.conc0 for s in species]
    off = [s.k_off for s in species]
    state = [0] * n if initial is None else [int(c) for c in initial]
    if any(c < 0 for c in state) or sum(state) > NR:
        raise ValueError("initial counts must be >= 0 and sum to <= NR")
    free = NR - sum(state)
    on_total = math.fsum(on)

    t = 0.0
    k = 0                       # next sample index
    events = 0
    expo = rng.standard_exponential(_BLOCK)
    unif = rng.random(_BLOCK)
    b = 0
    while k < n_samples:
        a_bind = free * on_total
        a_unbind = math.fsum(c * r for c, r in zip(state, off))
        a0 = a_bind + a_unbind
        if a0 <= 0.0:
            out[k:] = state
            break
        if b == _BLOCK:
            expo = rng.standard_exponential(_BLOCK)
            unif = rng.random(_BLOCK)
            b = 0
        t_next = t + expo[b] / a0
        u = unif[b] * a0
        b += 1
        while k < n_samples and grid[k] < t_next:
            out[k] = state
            k += 1
        if k >= n_samples:
            break
        t = t_next
        events += 1
        if u < a_bind:
            u /= free
            j = 0
            acc = on[0]
            while u >= acc and j < n - 1:
                j += 1
                acc += on[j]
            state[j] += 1
            free -= 1
        else:
            u -= a_bind
            j = 0
            acc = state[0] * off[0]
            while u >= acc and j < n - 1:
                j += 1
                acc += state[j] * off[j]
            if state[j] == 0:   # rounding at the top of the cumulative sum
                j = max(i for i in range(n) if state[i] > 0)
            state[j] -= 1
            free += 1
    return ReceptorTrajectory(grid, out, seed_val, NR, tau, events)


def simulate_replicas(species: Sequence[LigandSpec], NR: int, duration: float,
                      sample_dt: float, seed: int, replicas: int,
                      threads: int = 1) -> list[ReceptorTrajectory]:
    """Independent runs; replica i uses the stream spawned from (seed, i)."""
    children = np.random.SeedSequence(seed).spawn(replicas)

    def run(ss):
        return simulate(species, NR, duration, sample_dt, ss)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, children))
    return [run(ss) for ss in children]


def _burn_in_index(traj: ReceptorTrajectory) -> int:
    if not math.isfinite(traj.tau_B) or len(traj.t) < 2:
        return 0
    return min(int(math.ceil(10 * traj.tau_B / traj.dt)), len(traj.t) - 1)


def empirical_stats(traj: ReceptorTrajectory) -> EmpiricalStats:
    """Stationary occupancy and count variance after a burn-in of 10 tau_B."""
    i0 = _burn_in_index(traj)
    c = traj.counts[i0:].astype(float)
    total = c.sum(axis=1) if c.shape[1] else np.zeros(len(c))
    p_hat = float(total.mean() / traj.NR)
    var_hat = float(total.var(ddof=1)) if len(total) > 1 else 0.0
    p_j = tuple(float(v) for v in c.mean(axis=0) / traj.NR)
    window = traj.t[-1] - traj.t[i0]
    if math.isfinite(traj.tau_B):
        n_eff = max(window / (2 * traj.tau_B), 1.0)
        short = window < 100 * traj.tau_B
    else:
        n_eff, short = float(len(total)), False
    return EmpiricalStats(p_hat, var_hat, p_j, n_eff, short)


def occupancy_stderr(p: float, NR: int, n_eff: float) -> float:
    """Standard error of a mean occupancy fraction over n_eff independent windows."""
    return math.sqrt(max(p * (1.0 - p), 0.0) / (NR * n_eff))


def _lorentzian(f, s0, fc):
    return s0 / (1.0 + (f / fc) ** 2)


def empirical_psd(traj: ReceptorTrajectory, segments: int = 16,
                  fit_below: float = 0.25) -> EmpiricalPsd:
    """Welch-averaged periodogram of the total bound count plus a Lorentzian fit.

    The fit is done in log space on frequencies up to ``fit_below`` times the
    Nyquist frequency, where aliasing of the 1/f^2 tail is small.
    """
    i0 = _burn_in_index(traj)
    x = traj.total[i0:].astype(float)
    if len(x) < 64 * segments:
        raise ValueError(f"need at least {64 * segments} samples after burn-in, "
                         f"got {len(x)}")
    fs = 1.0 / traj.dt
    f, pxx = welch(x - x.mean(), fs=fs, nperseg=len(x) // segments,
                   detrend="constant")
    keep = (f > 0) & (f <= fit_below * fs / 2) & (pxx > 0)
    fk, pk = f[keep], pxx[keep]
    if len(fk) < 8:
        raise ValueError("too few periodogram bins for a Lorentzian fit")
    fc0 = (1.0 / (2 * np.pi * traj.tau_B) if math.isfinite(traj.tau_B)
           else fk[len(fk) // 2])
    s00 = float(np.median(pk[: max(3, len(pk) // 20)]))

    def model(logf, log_s0, log_fc):
        return np.log(_lorentzian(np.exp(logf), np.exp(log_s0), np.exp(log_fc)))

    p, _ = curve_fit(model, np.log(fk), np.log(pk),
                     p0=(math.log(s00), math.log(min(fc0, fk[-1]))))
    s0, fc = float(np.exp(p[0])), float(np.exp(p[1]))
    rms = float(np.sqrt(np.mean((np.log10(pk) - np.log10(_lorentzian(fk, s0, fc))) ** 2)))
    return EmpiricalPsd(f=f, psd=pxx, plateau=s0, corner=fc, fit_rms=rms)


def compare(species: Sequence[LigandSpec], traj: ReceptorTrajectory,
            with_psd: bool = True) -> dict:
    """Analytic occupancy, variance and corner next to their empirical values."""
    model = build_noise_model(species, traj.NR)
    st = empirical_stats(traj)
    se = occupancy_stderr(model.p_B, traj.NR, st.n_eff)
    rep = {
        "NR": traj.NR, "seed": traj.seed, "events": traj.events,
        "p_B": model.p_B, "p_hat": st.p_hat, "p_stderr": se,
        "p_B_j": list(model.p_Bj), "p_hat_j": list(st.p_hat_j),
        "var_NB": model.var_NB, "var_hat": st.var_hat,
        "tau_B": model.tau_B, "short_window": st.short_window,
    }
    if with_psd and not model.degenerate:
        try:
            ps = empirical_psd(traj)
        except ValueError as exc:
            rep["psd_error"] = str(exc)
        else:
            rep["corner_analytic"] = 1.0 / (2 * np.pi * model.tau_B)
            rep["corner_fit"] = ps.corner
            rep["psd_fit_rms_log10"] = ps.fit_rms
    return rep
