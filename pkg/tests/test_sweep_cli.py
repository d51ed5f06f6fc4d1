import json

import numpy as np
import pytest

from flexmc.cli import main
from flexmc.figures import FIGURES, reproduce_figure, with_interferers
from flexmc.params import ConfigError, preset
from flexmc.sweep import SweepSpec, run_sweep, to_csv


def test_two_point_sweep():
    t = run_sweep(SweepSpec("device.P0_surface", "log", 1e17, 1e19, 2, ("snr1",)),
                  preset("table1"))
    assert len(t.rows) == 2
    assert t.columns == ["device.P0_surface", "snr1_db", "status"]


def test_interferer_sweep_snr2_decreasing():
    cfg = preset("table1")
    L2 = cfg.interferers[0].conc0
    t = run_sweep(SweepSpec("ligand[1].conc0", "log", L2 / 100, L2 * 100, 7,
                            ("snr1", "snr2")), cfg)
    assert np.all(np.diff(t.column("snr2_db")) < 0)


def test_sep_sweep_columns():
    t = run_sweep(SweepSpec("device.P0_surface", "log", 5e16, 5e20, 3, ("sep1", "sep2")),
                  preset("table1"))
    assert t.columns[1:3] == ["sep1", "sep2"]
    assert t.failed == 0


def test_failed_points_are_flagged_not_fatal():
    t = run_sweep(SweepSpec("device.vg_fraction", "linear", 0.5, 1.5, 3, ("snr1",)),
                  preset("table1"))
    status = [r[-1] for r in t.rows]
    assert status[0] == "ok" and t.failed == 2
    assert np.isnan(t.column("snr1_db")[1:]).all()


def test_unknown_key_fails_early():
    with pytest.raises(ConfigError, match="device.bogus"):
        run_sweep(SweepSpec("device.bogus", "log", 1, 2, 2), preset("table1"))


@pytest.mark.parametrize("kw", [dict(lo=2, hi=1), dict(points=1), dict(lo=0),
                                dict(scale="cubic"), dict(outputs=("nope",))])
def test_invalid_specs(kw):
    base = dict(key="device.NA", scale="log", lo=1.0, hi=2.0, points=3, outputs=("snr1",))
    with pytest.raises(ConfigError):
        SweepSpec(**{**base, **kw})


def test_thread_pool_preserves_order():
    spec = SweepSpec("interferers.k_on", "log", 3e-20, 3e-16, 9, ("snr1", "snr2"))
    a = run_sweep(spec, preset("table1"), threads=1)
    b = run_sweep(spec, preset("table1"), threads=4)
    assert a.rows == b.rows


def test_csv_format():
    t = run_sweep(SweepSpec("device.Not", "log", 1e29, 1e31, 2, ("snr1",)), preset("table1"))
    text = to_csv(t, reproducible=True)
    lines = text.splitlines()
    assert all(l.startswith("# ") for l in lines[:-3])
    assert lines[-3] == "device.Not,snr1_db,status"
    value = lines[-2].split(",")[1]
    mantissa = value.split("e")[0].replace("-", "").replace(".", "")
    assert len(mantissa) == 9
    assert "created" not in text
    assert "created" in to_csv(t)


def test_figure_columns():
    cfg = preset("table1")
    assert reproduce_figure("fig4", cfg).columns == ["L2_conc", "k2_plus",
                                                     "sensitivity_normalized"]
    assert reproduce_figure("fig5", cfg).columns == ["f_hz", "s_binding", "s_flicker",
                                                     "s_total"]
    t = reproduce_figure("fig6b", cfg)
    assert t.columns == ["P0_surface", "snr1_db", "snr2_db"]
    assert np.all(np.diff(t.column("snr1_db")) > 0)
    t7 = reproduce_figure("fig7", cfg)
    assert len(t7.rows) == 17 * 17
    assert max(reproduce_figure("fig4", cfg).column("sensitivity_normalized")) == 1.0


def test_unknown_figure():
    with pytest.raises(ConfigError, match="fig4"):
        reproduce_figure("fig9", preset("table1"))


def test_multi_interferer_lists():
    cfg = with_interferers(preset("table1"), 4)
    assert len(cfg.interferers) == 4
    assert all(l.conc0 == cfg.target.conc0 and l.mw == cfg.target.mw
               for l in cfg.interferers)
    assert reproduce_figure("fig8a", preset("table1")).meta["ligand[2]"].startswith(
        "interferer2")


@pytest.mark.parametrize("fig", FIGURES)
def test_every_figure_builds(fig):
    t = reproduce_figure(fig, preset("improved"))
    assert t.rows and "failed_points" not in t.meta


# ---------------------------------------------------------------------------
# command line

def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cli_equilibrium_json(capsys):
    code, out, _ = run(capsys, "equilibrium")
    doc = json.loads(out)
    assert code == 0
    assert set(doc) >= {"P_free", "PL", "L_free", "iterations", "residual"}


def test_cli_config_errors(capsys, tmp_path):
    assert run(capsys, "snr", "--set", "device.nope=1")[0] == 2
    assert run(capsys, "snr", "--config", str(tmp_path / "missing.toml"))[0] == 2
    assert run(capsys, "snr", "--set", "ligand[4].conc0=1")[0] == 2
    assert run(capsys, "figure", "fig99")[0] == 2


def test_cli_convergence_error(capsys):
    code, _, err = run(capsys, "snr", "--set", "link.max_iter=1",
                       "--set", "interferers.conc0=1e13")
    assert code == 3


def test_cli_partial_sweep(capsys):
    code, out, _ = run(capsys, "sweep", "--key", "device.vg_fraction", "--scale", "linear",
                       "--lo", "0.5", "--hi", "1.5", "--points", "3", "--threads", "1")
    assert code == 4
    assert out.count("error:") == 2


def test_cli_noise_psd_grid(capsys):
    code, out, _ = run(capsys, "noise-psd", "--fgrid", "log:0.1:100:4", "--reproducible")
    rows = [l for l in out.splitlines() if not l.startswith("#")]
    assert code == 0 and rows[0] == "f_hz,s_binding,s_flicker,s_total" and len(rows) == 5
    assert run(capsys, "noise-psd", "--fgrid", "lin:1:2:3")[0] == 2


def test_cli_global_flags_before_subcommand(capsys):
    _, a, _ = run(capsys, "--preset", "improved", "--reproducible", "snr")
    assert "# preset: improved" in a and "created" not in a


def test_cli_json_format(capsys):
    code, out, _ = run(capsys, "sep", "--bits", "2", "--format", "json", "--reproducible")
    doc = json.loads(out)
    assert code == 0 and doc["rows"][0][0] == 2


def test_cli_oracle_writes_files(capsys, tmp_path):
    code, out, _ = run(capsys, "oracle", "--duration", "5", "--seed", "3",
                       "--set", "ligand[0].conc0=6.666e18", "--out", str(tmp_path))
    assert code == 0
    rep = json.loads((tmp_path / "oracle_report.json").read_text())
    assert rep["seed"] == 3 and rep["NR"] == 1000
    assert (tmp_path / "oracle_trajectory.csv").exists()


def test_cli_figure_is_deterministic(capsys, tmp_path):
    for d in ("a", "b"):
        assert main(["figure", "fig6a", "--reproducible", "--seed", "42",
                     "--out", str(tmp_path / d)]) == 0
    assert (tmp_path / "a" / "fig6a.csv").read_bytes() == \
        (tmp_path / "b" / "fig6a.csv").read_bytes()
