"""Declarative one-key parameter sweeps and tabular output with provenance.

A sweep varies a single scalar configuration key over a linear or log grid
and evaluates the requested metrics at every point. Points are independent;
a failing point is flagged in its row and the sweep carries on.
"""
from __future__ import annotations

import dataclasses
import datetime as _dt
import hashlib
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from .equilibrium import occupancy_fractions
from .link_metrics import (alphabet_from_config, evaluate_alphabet,
                           evaluate_ligands, sep, snr1, snr2, to_db)
from .params import Config, ConfigError, dump_config, get_value, set_value

METRICS = ("sensitivity", "snr1", "snr2", "sep1", "sep2", "psd", "equilibrium")

# columns contributed by each metric
_COLUMNS = {
    "sensitivity": ("sensitivity",),
    "snr1": ("snr1_db",),
    "snr2": ("snr2_db",),
    "sep1": ("sep1",),
    "sep2": ("sep2",),
    "psd": ("sigma2_binding", "sigma2_flicker", "sigma2_I"),
    "equilibrium": ("P_free", "theta_sum"),
}


@dataclass(frozen=True)
class SweepSpec:
    key: str
    scale: str = "log"
    lo: float = 0.0
    hi: float = 1.0
    points: int = 9
    outputs: tuple[str, ...] = ("snr1", "snr2")

    def __post_init__(self):
        if self.scale not in ("linear", "log"):
            raise ConfigError(f"sweep scale must be linear or log, got {self.scale!r}")
        if not self.lo < self.hi:
            raise ConfigError("sweep needs lo < hi")
        if self.scale == "log" and not self.lo > 0:
            raise ConfigError("log sweep needs lo > 0")
        if self.points < 2:
            raise ConfigError("sweep needs at least 2 points")
        bad = [o for o in self.outputs if o not in METRICS]
        if bad or not self.outputs:
            raise ConfigError(f"unknown sweep output(s) {bad}; valid: {list(METRICS)}")

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.logspace(math.log10(self.lo), math.log10(self.hi), self.points)
        return np.linspace(self.lo, self.hi, self.points)

    def columns(self) -> list[str]:
        return [c for o in self.outputs for c in _COLUMNS[o]]


@dataclass
class Table:
    """Rows of numbers plus an ordered metadata header."""
    columns: list[str]
    rows: list[list[Any]]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> int:
        if "status" not in self.columns:
            return 0
        k = self.columns.index("status")
        return sum(1 for r in self.rows if r[k] != "ok")

    def column(self, name: str) -> np.ndarray:
        k = self.columns.index(name)
        return np.array([r[k] for r in self.rows], dtype=float)


# ---------------------------------------------------------------------------
# evaluation

def evaluate_metrics(cfg: Config, outputs: Sequence[str]) -> dict[str, float]:
    """Scalar metrics of one configuration, keyed by column name."""
    out: dict[str, float] = {}
    needs_point = {"sensitivity", "snr1", "snr2", "psd", "equilibrium"} & set(outputs)
    if needs_point:
        target = cfg.target
        if target is None:
            raise ConfigError("configuration has no target ligand")
        st = evaluate_ligands(cfg.ligands, target.mw, cfg)
        out["sensitivity"] = st.S_sum
        out["snr1_db"] = to_db(snr1(st))
        out["snr2_db"] = to_db(snr2(st))
        out["sigma2_binding"] = st.noise.sigma2_binding
        out["sigma2_flicker"] = st.noise.sigma2_flicker
        out["sigma2_I"] = st.noise.sigma2_I
        out["P_free"] = st.equilibrium.P_free
        out["theta_sum"] = occupancy_fractions(st.equilibrium, 1.0)[1]
    if {"sep1", "sep2"} & set(outputs):
        stats = evaluate_alphabet(alphabet_from_config(cfg), cfg)
        out["sep1"] = sep(stats, "sep1").value
        out["sep2"] = sep(stats, "sep2").value
    return out


def _point(args) -> tuple[list[float], str]:
    cfg, key, value, outputs, columns = args
    try:
        res = evaluate_metrics(set_value(cfg, key, float(value)), outputs)
    except ConfigError:
        raise
    except Exception as exc:  # flagged, the sweep continues
        return [math.nan] * len(columns), f"error: {type(exc).__name__}: {exc}"
    return [float(res[c]) for c in columns], "ok"


def sweep_values(cfg: Config, key: str, values: Sequence[float],
                 outputs: Sequence[str], threads: int = 1
                 ) -> list[tuple[list[float], str]]:
    """Metric columns and a status string for each value, in input order."""
    columns = [c for o in outputs for c in _COLUMNS[o]]
    jobs = [(cfg, key, v, tuple(outputs), columns) for v in values]
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(min(threads, len(jobs))) as pool:
            return list(pool.map(_point, jobs))
    return [_point(j) for j in jobs]


def run_sweep(spec: SweepSpec, cfg: Config, threads: int = 1) -> Table:
    """One row per sweep point: the swept value, the metric columns, a status.

    Rows are ordered by sweep index whatever the completion order.
    """
    get_value(cfg, spec.key)        # unknown keys fail before any work
    values = spec.values()
    results = sweep_values(cfg, spec.key, values, spec.outputs, threads)
    rows = [[float(v)] + vals + [status] for v, (vals, status) in zip(values, results)]
    return Table([spec.key] + spec.columns() + ["status"], rows, provenance(cfg))


# ---------------------------------------------------------------------------
# provenance and serialization

def config_hash(cfg: Config) -> str:
    return hashlib.sha256(dump_config(cfg).encode()).hexdigest()


def provenance(cfg: Config, **extra: Any) -> dict[str, Any]:
    meta: dict[str, Any] = {"tool": f"flexmc {__version__}",
                            "preset": cfg.preset or "none",
                            "config_sha256": config_hash(cfg)}
    for name in cfg.defaulted:
        meta[f"default device.{name}"] = getattr(cfg.device, name)
    for f in dataclasses.fields(cfg.link):
        meta[f"link.{f.name}"] = getattr(cfg.link, f.name)
    for i, lig in enumerate(cfg.ligands):
        meta[f"ligand[{i}]"] = (f"{lig.name} role={lig.role} conc0={lig.conc0:.8e} "
                                f"k_on={lig.k_on:.8e} k_off={lig.k_off:.8e} mw={lig.mw:.8e}")
    meta.update(extra)
    return meta


def format_value(v: Any) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.8e}"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def to_csv(table: Table, reproducible: bool = False) -> str:
    """``#``-prefixed metadata, a header row, then 9-significant-digit floats."""
    buf = io.StringIO()
    meta = dict(table.meta)
    if not reproducible:
        meta["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    for k, v in meta.items():
        buf.write(f"# {k}: {format_value(v)}\n")
    buf.write(",".join(table.columns) + "\n")
    for row in table.rows:
        buf.write(",".join(format_value(v) for v in row) + "\n")
    return buf.getvalue()


def _jsonable(v: Any) -> Any:
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    return v


def to_json(table: Table, reproducible: bool = False) -> str:
    meta = dict(table.meta)
    if not reproducible:
        meta["created"] = _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    doc = {"meta": meta, "columns": table.columns, "rows": table.rows}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n"


def default_threads() -> int:
    return os.cpu_count() or 1
