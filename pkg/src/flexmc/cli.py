"""``flexmc`` command-line front end.

Exit codes: 0 success, 2 configuration error, 3 solver convergence error,
4 sweep or figure finished with failed points.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .equilibrium import ConvergenceError
from .figures import FIGURES, reproduce_figure
from .link_metrics import (alphabet_from_config, evaluate_alphabet,
                           evaluate_ligands, ml_thresholds, sep, snr1, snr2,
                           solve_symbol_equilibrium, to_db, variant_moments)
from .params import (Config, ConfigError, ValidationError, load_config,
                     parse_assignment, preset, set_value)
from .stochastic_oracle import compare, simulate
from .sweep import (METRICS, SweepSpec, Table, _jsonable, default_threads,
                    provenance, run_sweep, to_csv, to_json)
from .transducer import log_grid

EXIT_CONFIG, EXIT_CONVERGENCE, EXIT_PARTIAL = 2, 3, 4

log = logging.getLogger("flexmc")


def _common(suppress: bool = False) -> argparse.ArgumentParser:
    """Global flags. The copy attached to each subcommand leaves values
    given before the subcommand name untouched."""
    p = argparse.ArgumentParser(add_help=False,
                                argument_default=argparse.SUPPRESS if suppress else None)
    g = p.add_argument_group("global options")
    g.add_argument("--config", type=Path, help="TOML configuration file")
    g.add_argument("--preset", choices=("table1", "improved"),
                   help="device parameter set (default table1 when no config)")
    g.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help="override one configuration key (repeatable)")
    g.add_argument("--out", type=Path, help="output directory (default: stdout)")
    g.add_argument("--format", choices=("csv", "json"),
                   **({} if suppress else {"default": "csv"}))
    g.add_argument("--seed", type=int, **({} if suppress else {"default": 0}))
    g.add_argument("--threads", type=int,
                   help="worker threads for sweeps (default: CPU count)")
    g.add_argument("--reproducible", action="store_true",
                   help="omit the timestamp from output metadata",
                   **({"default": argparse.SUPPRESS} if suppress else {}))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="flexmc", description=__doc__.splitlines()[0],
                                     parents=[_common()])
    common = _common(suppress=True)
    parser.add_argument("--version", action="version", version=f"flexmc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("equilibrium", parents=[common],
                   help="solve the competitive binding equilibrium")
    p = sub.add_parser("noise-psd", parents=[common], help="output-current noise spectrum")
    p.add_argument("--fgrid", default=None, metavar="log:FMIN:FMAX:N",
                   help="frequency grid (default: the device noise band, 200 points)")
    sub.add_parser("snr", parents=[common], help="SNR with and without interference")
    p = sub.add_parser("sep", parents=[common], help="symbol error probability")
    p.add_argument("--bits", type=int, choices=(1, 2), default=None)
    sub.add_parser("sensitivity", parents=[common], help="transducer chain outputs")
    p = sub.add_parser("oracle", parents=[common],
                       help="stochastic simulation of the receptor population")
    p.add_argument("--duration", type=float, required=True, help="simulated time (s)")
    p.add_argument("--nr", type=int, default=1000, help="number of receptors")
    p.add_argument("--sample-dt", type=float, default=None,
                   help="sampling interval (s); default tau_B/20, at most duration/1000")
    p = sub.add_parser("sweep", parents=[common], help="one-key parameter sweep")
    p.add_argument("--key", required=True)
    p.add_argument("--scale", choices=("linear", "log"), default="log")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--points", type=int, default=9)
    p.add_argument("--outputs", default="snr1,snr2",
                   help=f"comma-separated subset of {','.join(METRICS)}")
    p = sub.add_parser("figure", parents=[common], help="dataset behind a figure")
    p.add_argument("id", help=f"one of {', '.join(FIGURES)}")
    return parser


# ---------------------------------------------------------------------------
# configuration

def resolve_config(args: argparse.Namespace) -> Config:
    if args.config is not None:
        cfg = load_config(args.config)
        if args.preset and cfg.preset != args.preset:
            raise ConfigError("--preset conflicts with the preset named in --config")
    else:
        name = args.preset or "table1"
        cfg = preset(name)
        if args.preset is None:
            log.info("no --config or --preset given; using preset %s", name)
    for text in args.set or ():
        key, value = parse_assignment(text)
        cfg = set_value(cfg, key, value)
    return cfg


# ---------------------------------------------------------------------------
# emission

def _emit(args, name: str, table: Table | None = None, doc: dict | None = None) -> None:
    if table is not None:
        text = to_json(table, args.reproducible) if args.format == "json" \
            else to_csv(table, args.reproducible)
        suffix = args.format
    else:
        text = json.dumps(_jsonable(doc), indent=2) + "\n"
        suffix = "json"
    if args.out is None:
        sys.stdout.write(text)
    else:
        args.out.mkdir(parents=True, exist_ok=True)
        path = args.out / f"{name}.{suffix}"
        path.write_text(text)
        log.info("wrote %s", path)


def _single_row(cfg: Config, values: dict, **extra) -> Table:
    return Table(list(values), [list(values.values())], provenance(cfg, **extra))


# ---------------------------------------------------------------------------
# subcommands

def cmd_equilibrium(args, cfg: Config) -> int:
    prob, sol = solve_symbol_equilibrium(cfg.ligands, cfg)
    doc = sol.as_dict()
    doc["units"] = ("occupancy fractions of the receptor pool; ligand "
                    f"levels in units of {cfg.link.receptor_conc:g} m^-3")
    doc["species"] = [l.name for l in cfg.ligands]
    _emit(args, "equilibrium", doc=doc)
    return 0


def _parse_fgrid(text: str) -> np.ndarray:
    parts = text.split(":")
    if len(parts) != 4 or parts[0] != "log":
        raise ConfigError(f"--fgrid must look like log:FMIN:FMAX:N, got {text!r}")
    try:
        lo, hi, n = float(parts[1]), float(parts[2]), int(parts[3])
    except ValueError:
        raise ConfigError(f"--fgrid: cannot parse {text!r}") from None
    if not (0 < lo < hi and n >= 2):
        raise ConfigError("--fgrid needs 0 < FMIN < FMAX and N >= 2")
    return log_grid(lo, hi, n)


def cmd_noise_psd(args, cfg: Config) -> int:
    grid = _parse_fgrid(args.fgrid) if args.fgrid else None
    st = evaluate_ligands(cfg.ligands, cfg.target.mw, cfg, grid=grid)
    n = st.noise
    rows = [[float(f), float(b), float(fl), float(t)]
            for f, b, fl, t in zip(n.grid, n.s_binding, n.s_flicker, n.s_total)]
    meta = provenance(cfg, sigma2_binding=n.sigma2_binding,
                      sigma2_flicker=n.sigma2_flicker, sigma2_I=n.sigma2_I)
    _emit(args, "noise_psd", Table(["f_hz", "s_binding", "s_flicker", "s_total"], rows, meta))
    return 0


def cmd_snr(args, cfg: Config) -> int:
    st = evaluate_ligands(cfg.ligands, cfg.target.mw, cfg)
    s1, s2 = snr1(st), snr2(st)
    values = {"snr1": s1, "snr2": s2, "snr1_db": to_db(s1), "snr2_db": to_db(s2),
              "mu_I_target": st.mu_I_target, "mu_I_interferer": st.mu_I_interferer,
              "mu_I_sum": st.mu_I_sum, "sigma2_I": st.sigma2}
    _emit(args, "snr", _single_row(cfg, values))
    return 0


def cmd_sep(args, cfg: Config) -> int:
    bits = args.bits or cfg.link.bits
    cfg = set_value(cfg, "link.bits", bits)
    stats = evaluate_alphabet(alphabet_from_config(cfg), cfg)
    values: dict = {"bits": bits}
    extra = {}
    for variant in ("sep1", "sep2"):
        res = sep(stats, variant)
        values[variant] = res.value
        values[f"{variant}_clamped"] = res.clamped
        mu, var = variant_moments(stats, variant)
        order = np.argsort(mu, kind="stable")
        if np.all(np.diff(mu[order]) > 0):
            lam = ml_thresholds(mu[order], var[order]).lam
            extra[f"{variant}_thresholds"] = " ".join(f"{x:.8e}" for x in lam)
    _emit(args, "sep", _single_row(cfg, values, **extra))
    return 0


def cmd_sensitivity(args, cfg: Config) -> int:
    st = evaluate_ligands(cfg.ligands, cfg.target.mw, cfg)
    values = {}
    for comp in ("target", "interferer", "sum"):
        r = getattr(st.response, comp)
        values.update({f"{comp}_ns": r.ns, f"{comp}_dk": r.dk, f"{comp}_dy": r.dy,
                       f"{comp}_dpsi": r.dpsi, f"{comp}_S": r.S,
                       f"{comp}_I_mean": r.I_mean})
    _emit(args, "sensitivity", _single_row(cfg, values))
    return 0


def cmd_oracle(args, cfg: Config) -> int:
    from .receptor_noise import build_noise_model
    species = list(cfg.ligands)
    model = build_noise_model(species, args.nr)
    if args.sample_dt is not None:
        dt = args.sample_dt
    else:
        # tau_B / 20, but never fewer than 1000 samples per run
        dt = min(model.tau_B / 20.0, args.duration / 1000.0)
    traj = simulate(species, args.nr, args.duration, dt, args.seed)
    report = compare(species, traj)
    report["duration"] = args.duration
    report["sample_dt"] = dt
    cols = ["t"] + [f"bound_{l.name}" for l in species] + ["bound_total"]
    rows = [[float(t)] + [int(c) for c in row] + [int(row.sum())]
            for t, row in zip(traj.t, traj.counts)]
    meta = provenance(cfg, seed=args.seed, NR=args.nr, sample_dt=dt)
    if args.out is not None:
        _emit(args, "oracle_trajectory", Table(cols, rows, meta))
    _emit(args, "oracle_report", doc=report)
    return 0


def cmd_sweep(args, cfg: Config) -> int:
    outputs = tuple(o.strip() for o in args.outputs.split(",") if o.strip())
    spec = SweepSpec(args.key, args.scale, args.lo, args.hi, args.points, outputs)
    table = run_sweep(spec, cfg, args.threads)
    _emit(args, "sweep", table)
    if table.failed:
        log.error("%d of %d sweep points failed", table.failed, len(table.rows))
        return EXIT_PARTIAL
    return 0


def cmd_figure(args, cfg: Config) -> int:
    table = reproduce_figure(args.id, cfg, args.threads)
    table.meta["seed"] = args.seed
    _emit(args, args.id, table)
    if table.meta.get("failed_points"):
        log.error("%s: %d points failed", args.id, table.meta["failed_points"])
        return EXIT_PARTIAL
    return 0


_COMMANDS = {"equilibrium": cmd_equilibrium, "noise-psd": cmd_noise_psd,
             "snr": cmd_snr, "sep": cmd_sep, "sensitivity": cmd_sensitivity,
             "oracle": cmd_oracle, "sweep": cmd_sweep, "figure": cmd_figure}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="flexmc: %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads is None:
        args.threads = default_threads()
    try:
        cfg = resolve_config(args)
        if args.command not in ("oracle", "equilibrium") and cfg.target is None:
            raise ConfigError("configuration has no target ligand")
        return _COMMANDS[args.command](args, cfg)
    except (ConfigError, ValidationError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except ConvergenceError as exc:
        log.error("convergence error: %s", exc)
        return EXIT_CONVERGENCE


if __name__ == "__main__":
    sys.exit(main())
