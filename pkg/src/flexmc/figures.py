"""Datasets behind the published figures, one CSV table per figure id.

Axis ranges are centred on the configuration's own values and span four
decades (two either side), except the normalized-sensitivity curves, which
run from 1e-2 to 1e3 times the target's dissociation constant so that the
saturation plateau is reached.
"""
from __future__ import annotations

import dataclasses
import math
from typing import Callable

import numpy as np

from .link_metrics import evaluate_ligands
from .params import Config, ConfigError, LigandSpec, TABLE1_K_OFF, TABLE1_K_ON, set_value
from .sweep import Table, provenance, sweep_values

FIGURES = ("fig4", "fig5", "fig6a", "fig6b", "fig6c", "fig6d", "fig6e", "fig7",
           "fig8a", "fig8b", "fig8c", "fig10a", "fig10b", "fig10c")

POINTS = 25             # one-dimensional sweeps
GRID_POINTS = 17        # per axis of the two-dimensional grid
FIG4_RATES = (0.1, 1.0, 10.0)   # k2+ multipliers for the sensitivity curves


def with_interferers(cfg: Config, n: int) -> Config:
    """Replace the interferers by ``n`` copies sharing the target's weight and
    concentration, with the kinetics of the first configured interferer."""
    target = cfg.target
    if target is None:
        raise ConfigError("configuration has no target ligand")
    proto = cfg.interferers[0] if cfg.interferers else None
    k_on = proto.k_on if proto else TABLE1_K_ON
    k_off = proto.k_off if proto else TABLE1_K_OFF
    ints = [LigandSpec(f"interferer{j + 1}", target.conc0, k_on, k_off, target.mw,
                       "interferer") for j in range(n)]
    return dataclasses.replace(cfg, ligands=(target, *ints))


def _interferer(cfg: Config) -> LigandSpec:
    if not cfg.interferers:
        raise ConfigError("figure needs at least one interferer")
    return cfg.interferers[0]


def _around(center: float, points: int = POINTS, decades: float = 2.0) -> np.ndarray:
    c = math.log10(center)
    return np.logspace(c - decades, c + decades, points)


# (sweep key, column name, centre value) for the single-axis SNR/SEP figures
def _axis(cfg: Config, which: str) -> tuple[str, str, float]:
    lig = _interferer(cfg)
    return {
        "L2": ("interferers.conc0", "L2_conc", lig.conc0),
        "P0": ("device.P0_surface", "P0_surface", cfg.device.P0_surface),
        "Not": ("device.Not", "Not", cfg.device.Not),
        "kp": ("interferers.k_on", "k2_plus", lig.k_on),
        "km": ("interferers.k_off", "k2_minus", lig.k_off),
        "K2": ("interferers.K", "K2", lig.K),
    }[which]


def _snr_table(cfg: Config, which: str, threads: int,
               grid_from: Config | None = None) -> Table:
    """SNR pair along one axis; ``grid_from`` supplies the axis centre when
    the sweep must line up with another configuration's figure."""
    key, col, center = _axis(grid_from or cfg, which)
    xs = _around(center)
    res = sweep_values(cfg, key, xs, ("snr1", "snr2"), threads)
    return _assemble(cfg, [col, "snr1_db", "snr2_db"], xs, res, sweep=key)


def _sep_table(cfg: Config, which: str, threads: int) -> Table:
    key, col, center = _axis(cfg, which)
    xs = _around(center)
    cols: list[list[float]] = [[] for _ in xs]
    status = ["ok"] * len(xs)
    for bits in (1, 2):
        c = set_value(cfg, "link.bits", bits)
        for i, (vals, st) in enumerate(sweep_values(c, key, xs, ("sep1", "sep2"), threads)):
            cols[i] += vals
            if st != "ok":
                status[i] = st
    return _assemble(cfg, [col, "sep1_1bit", "sep2_1bit", "sep1_2bit", "sep2_2bit"],
                     xs, list(zip(cols, status)), sweep=key)


def _assemble(cfg: Config, columns: list[str], xs, results, **extra) -> Table:
    rows = [[float(x)] + list(vals) for x, (vals, _) in zip(xs, results)]
    errors = [st for _, st in results if st != "ok"]
    meta = provenance(cfg, **extra)
    if errors:
        meta["failed_points"] = len(errors)
        meta["first_error"] = errors[0]
    return Table(columns, rows, meta)


def _fig4(cfg: Config, threads: int) -> Table:
    target = cfg.target
    lig = _interferer(cfg)
    xs = np.logspace(math.log10(1e-2 * target.K), math.log10(1e3 * target.K), POINTS)
    rows, errors = [], []
    for m in FIG4_RATES:
        kp = lig.k_on * m
        c = set_value(cfg, "interferers.k_on", kp)
        for x, (vals, st) in zip(xs, sweep_values(c, "interferers.conc0", xs,
                                                  ("sensitivity",), threads)):
            rows.append([float(x), kp, vals[0]])
            if st != "ok":
                errors.append(st)
    peak = np.nanmax([r[2] for r in rows])
    for r in rows:
        r[2] = r[2] / peak
    meta = provenance(cfg, sweep="interferers.conc0 x interferers.k_on",
                      normalization="global maximum")
    if errors:
        meta["failed_points"] = len(errors)
        meta["first_error"] = errors[0]
    return Table(["L2_conc", "k2_plus", "sensitivity_normalized"], rows, meta)


def _fig5(cfg: Config, threads: int) -> Table:
    st = evaluate_ligands(cfg.ligands, cfg.target.mw, cfg)
    n = st.noise
    rows = [[float(f), float(b), float(fl), float(t)]
            for f, b, fl, t in zip(n.grid, n.s_binding, n.s_flicker, n.s_total)]
    return Table(["f_hz", "s_binding", "s_flicker", "s_total"], rows,
                 provenance(cfg, sigma2_binding=n.sigma2_binding,
                            sigma2_flicker=n.sigma2_flicker))


def _fig7(cfg: Config, threads: int) -> Table:
    lig = _interferer(cfg)
    xs = _around(lig.conc0, GRID_POINTS)
    ks = _around(lig.k_on, GRID_POINTS)
    rows, errors = [], []
    for kp in ks:
        c = set_value(cfg, "interferers.k_on", kp)
        for x, (vals, st) in zip(xs, sweep_values(c, "interferers.conc0", xs,
                                                  ("snr1", "snr2"), threads)):
            rows.append([float(x), float(kp), vals[0], vals[1]])
            if st != "ok":
                errors.append(st)
    meta = provenance(cfg, sweep="interferers.conc0 x interferers.k_on")
    if errors:
        meta["failed_points"] = len(errors)
        meta["first_error"] = errors[0]
    return Table(["L2_conc", "k2_plus", "snr1_db", "snr2_db"], rows, meta)


_BUILDERS: dict[str, Callable[[Config, int], Table]] = {
    "fig4": _fig4,
    "fig5": _fig5,
    "fig6a": lambda c, t: _snr_table(c, "L2", t),
    "fig6b": lambda c, t: _snr_table(c, "P0", t),
    "fig6c": lambda c, t: _snr_table(c, "Not", t),
    "fig6d": lambda c, t: _snr_table(c, "kp", t),
    "fig6e": lambda c, t: _snr_table(c, "km", t),
    "fig7": _fig7,
    "fig8a": lambda c, t: _snr_table(with_interferers(c, 2), "P0", t, c),
    "fig8b": lambda c, t: _snr_table(with_interferers(c, 4), "kp", t, c),
    "fig8c": lambda c, t: _snr_table(with_interferers(c, 4), "L2", t, c),
    "fig10a": lambda c, t: _sep_table(c, "L2", t),
    "fig10b": lambda c, t: _sep_table(c, "P0", t),
    "fig10c": lambda c, t: _sep_table(c, "K2", t),
}


def reproduce_figure(fig_id: str, cfg: Config, threads: int = 1) -> Table:
    """Dataset of one figure for the given configuration."""
    if fig_id not in _BUILDERS:
        raise ConfigError(f"unknown figure {fig_id!r}; valid: {', '.join(FIGURES)}")
    if cfg.target is None:
        raise ConfigError("configuration has no target ligand")
    table = _BUILDERS[fig_id](cfg, threads)
    table.meta = {"figure": fig_id, **table.meta}
    return table
