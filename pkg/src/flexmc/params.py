"""Physical constants, device configuration, presets and config-file ingestion.

Everything is stored in SI internally. Config files may give selected keys
in lab units via a suffix (``L_um = 4`` instead of ``L = 4e-6``); the suffix
is stripped and the value converted on load.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import tomli
import tomli_w
from scipy import constants as _c

logger = logging.getLogger(__name__)

Q = _c.e                    # elementary charge (C)
KB = _c.k                   # Boltzmann constant (J/K)
EPS0 = _c.epsilon_0         # vacuum permittivity (F/m)
N_AVOGADRO = _c.Avogadro    # 1/mol


class ConfigError(ValueError):
    """Missing, unknown or ill-typed configuration key."""


class ValidationError(ValueError):
    """A configuration value violates a physical constraint."""


# suffix -> multiplier into SI
UNIT_SUFFIXES: dict[str, float] = {
    "_um": 1e-6,
    "_nm": 1e-9,
    "_GPa": 1e9,
    "_gmol": 1.0,           # molecular weights are kept in g/mol
    "_percm3": 1e6,         # cm^-3 -> m^-3
    "_percm3ev": 1e6,       # eV^-1 cm^-3 -> eV^-1 m^-3
    "_percm2": 1e4,         # cm^-2 -> m^-2
}


@dataclass(frozen=True)
class LigandSpec:
    name: str
    conc0: float            # total concentration (m^-3)
    k_on: float             # association rate (m^3/s)
    k_off: float            # dissociation rate (1/s)
    mw: float               # molecular weight (g/mol)
    role: str = "interferer"

    def __post_init__(self):
        _require(self.conc0 >= 0, f"ligand {self.name}: conc0 >= 0")
        _require(self.k_on > 0, f"ligand {self.name}: k_on > 0")
        _require(self.k_off > 0, f"ligand {self.name}: k_off > 0")
        _require(self.mw > 0, f"ligand {self.name}: mw > 0")
        _require(self.role in ("target", "interferer"),
                 f"ligand {self.name}: role in {{target, interferer}}")
        _require(math.isfinite(self.K) and self.K > 0,
                 f"ligand {self.name}: K = k_off/k_on finite and > 0")

    @property
    def K(self) -> float:
        """Dissociation constant (m^-3)."""
        return self.k_off / self.k_on


@dataclass(frozen=True)
class DeviceConfig:
    # geometry and material
    W: float = 1e-6                 # beam width (m)
    L: float = 8e-6                 # beam length (m)
    H: float = 260e-9               # beam thickness (m)
    y0: float = 100e-9              # air gap (m)
    yd: float = 10e-9               # dielectric thickness (m)
    E: float = 4e9                  # Young's modulus (Pa)
    NA: float = 1e22                # substrate doping (m^-3)
    Not: float = 2.3e30             # oxide trap density (eV^-1 m^-3)
    P0_surface: float = 5e18        # receptor surface density (m^-2)
    eps_s: float = 11.7 * EPS0      # substrate permittivity (F/m)
    eps_ox: float = 3.9 * EPS0      # oxide permittivity (F/m)
    # electrical operating point
    VG: float | None = None         # gate bias (V); None -> vg_fraction * V_pullin
    vg_fraction: float = 0.99
    psi_s: float = -0.5             # surface potential (V)
    VTH: float = -0.4               # threshold voltage (V)
    IDS1: float = 1e-9              # pre-binding drain current (A)
    # flicker-noise material constants
    lambda_tun: float = 1e-23       # effective tunnelling distance (m)
    alpha_s: float = 1e4            # Coulomb scattering coefficient (V s/C)
    mu_p: float = 0.02              # hole mobility (m^2/(V s))
    m_ideality: float = 1.5
    T: float = 300.0                # K
    rho_ligand: float = 1350.0      # ligand mass density (kg/m^3)
    f_min: float = 1e-2             # noise band (Hz)
    f_max: float = 1e4
    B: float = 1.0                  # symbol rate (1/s)
    k_stiff: float | None = None    # override for the beam stiffness (N/m)

    def __post_init__(self):
        for name in ("W", "L", "H", "y0", "yd", "E", "NA", "P0_surface",
                     "eps_s", "eps_ox", "T", "rho_ligand", "m_ideality",
                     "IDS1", "B", "lambda_tun"):
            val = getattr(self, name)
            _require(math.isfinite(val) and val > 0, f"{name} > 0")
        _require(self.Not >= 0, "Not >= 0")
        _require(0 < self.f_min < self.f_max, "0 < f_min < f_max")
        _require(0 < self.vg_fraction < 1, "0 < vg_fraction < 1")
        if self.k_stiff is not None:
            _require(self.k_stiff > 0, "k_stiff > 0")

    @property
    def y_op(self) -> float:
        """Gate position at the near-pull-in operating point (m)."""
        return 2.0 * self.y0 / 3.0


@dataclass(frozen=True)
class DerivedDevice:
    k_stiff: float      # N/m
    A: float            # gate area (m^2)
    Cox: float          # F/m^2
    NR: float           # receptor count
    V_pullin: float     # V
    VG: float           # resolved gate bias (V)


@dataclass(frozen=True)
class LinkSettings:
    """Modulation, solver and model-variant switches."""
    bits: int = 1
    mw_min: float = 89.0
    mw_max: float = 763.0
    mw_list: tuple[float, ...] | None = None
    # volumetric receptor concentration used to scale the equilibrium problem
    # into occupancy-fraction form (m^-3)
    receptor_conc: float = 1e12
    tol: float = 1e-12
    max_iter: int = 1_000_000
    psd_normalization: str = "fourier_pair"     # or "as_printed"
    displacement_factor3: bool = False
    permittivity: str = "relative"              # or "absolute"
    current_mode: str = "delta"                 # or "ratio"
    gm_current: str = "sum"                     # or "baseline"

    def __post_init__(self):
        _require(self.bits in (1, 2), "bits in {1, 2}")
        _require(self.mw_min > 0 and self.mw_max > 0, "mw_min, mw_max > 0")
        _require(self.receptor_conc > 0, "receptor_conc > 0")
        _require(self.tol > 0, "tol > 0")
        _require(self.max_iter >= 1, "max_iter >= 1")
        _require(self.psd_normalization in ("as_printed", "fourier_pair"),
                 "psd_normalization in {as_printed, fourier_pair}")
        _require(self.permittivity in ("relative", "absolute"),
                 "permittivity in {relative, absolute}")
        _require(self.current_mode in ("delta", "ratio"),
                 "current_mode in {delta, ratio}")
        _require(self.gm_current in ("sum", "baseline"),
                 "gm_current in {sum, baseline}")


@dataclass(frozen=True)
class Config:
    """Everything one pipeline run needs."""
    device: DeviceConfig = field(default_factory=DeviceConfig)
    ligands: tuple[LigandSpec, ...] = ()
    link: LinkSettings = field(default_factory=LinkSettings)
    preset: str | None = None
    defaulted: tuple[str, ...] = ()

    @property
    def target(self) -> LigandSpec | None:
        for lig in self.ligands:
            if lig.role == "target":
                return lig
        return None

    @property
    def interferers(self) -> tuple[LigandSpec, ...]:
        return tuple(l for l in self.ligands if l.role == "interferer")


def _require(cond: bool, constraint: str) -> None:
    if not cond:
        raise ValidationError(f"constraint violated: {constraint}")


def derive_device(cfg: DeviceConfig) -> DerivedDevice:
    A = cfg.W * cfg.L
    if cfg.k_stiff is not None:
        k = cfg.k_stiff
    else:
        # fixed-fixed beam, centre point load
        k = 16.0 * cfg.E * cfg.W * cfg.H**3 / cfg.L**3
    v_pi = math.sqrt(8.0 * k * cfg.y0**3 / (27.0 * EPS0 * A))
    vg = cfg.VG if cfg.VG is not None else cfg.vg_fraction * v_pi
    return DerivedDevice(k_stiff=k, A=A, Cox=cfg.eps_ox / cfg.yd,
                         NR=cfg.P0_surface * A, V_pullin=v_pi, VG=vg)


# ---------------------------------------------------------------------------
# presets

# reference kinetics, shared by both presets
TABLE1_K_ON = 3e-18         # m^3/s
TABLE1_K_OFF = 20.0         # 1/s
TABLE1_K = TABLE1_K_OFF / TABLE1_K_ON

# concentrations are not tabulated; the link operates at low occupancy
# (target at 1e-5 of its dissociation constant) with a trace interferer
# 1e-3 times weaker in concentration and equal in affinity
DEFAULT_TARGET_CONC = 1e-5 * TABLE1_K
DEFAULT_INTERFERER_CONC = 1e-3 * DEFAULT_TARGET_CONC

_TABLE1_DEVICE = dict(W=1e-6, L=8e-6, H=260e-9, y0=100e-9, E=4e9, NA=1e22,
                      yd=10e-9, Not=2.3e30, P0_surface=5e18)
_IMPROVED_DEVICE = dict(_TABLE1_DEVICE, L=4e-6, H=40e-9, E=200e9)

PRESETS = {"table1": _TABLE1_DEVICE, "improved": _IMPROVED_DEVICE}


def default_ligands(n_interferers: int = 1, mw: float = 89.0,
                    target_conc: float = DEFAULT_TARGET_CONC,
                    interferer_conc: float = DEFAULT_INTERFERER_CONC
                    ) -> tuple[LigandSpec, ...]:
    ligs = [LigandSpec("target", target_conc, TABLE1_K_ON, TABLE1_K_OFF, mw,
                       "target")]
    for j in range(n_interferers):
        ligs.append(LigandSpec(f"interferer{j + 1}", interferer_conc,
                               TABLE1_K_ON, TABLE1_K_OFF, mw, "interferer"))
    return tuple(ligs)


def preset(name: str, **link_kw) -> Config:
    """Build a named preset: ``table1`` (tabulated geometry) or ``improved``."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; valid: {sorted(PRESETS)}")
    dev = DeviceConfig(**PRESETS[name])
    return Config(device=dev, ligands=default_ligands(),
                  link=LinkSettings(**link_kw), preset=name,
                  defaulted=_defaulted_device_keys(PRESETS[name]))


# ---------------------------------------------------------------------------
# config files

_DEVICE_FIELDS = {f.name: f for f in dataclasses.fields(DeviceConfig)}
_LINK_FIELDS = {f.name: f for f in dataclasses.fields(LinkSettings)}
_LIGAND_FIELDS = {f.name: f for f in dataclasses.fields(LigandSpec)}


def _defaulted_device_keys(given) -> tuple[str, ...]:
    return tuple(k for k in _DEVICE_FIELDS if k not in given)


def split_unit(key: str) -> tuple[str, float]:
    """``'L_um'`` -> ``('L', 1e-6)``; keys without a known suffix pass through."""
    for suf, mult in UNIT_SUFFIXES.items():
        if key.endswith(suf) and len(key) > len(suf):
            return key[: -len(suf)], mult
    return key, 1.0


def _coerce(section: str, key: str, value: Any, ftype) -> Any:
    where = f"{section}.{key}" if section else key
    t = str(ftype)
    if value is None:
        return None
    if "bool" in t:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("on", "true", "1", "off", "false", "0"):
            return value.lower() in ("on", "true", "1")
        raise ConfigError(f"{where}: expected boolean, got {value!r}")
    if "tuple" in t:
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"{where}: expected a list, got {value!r}")
        try:
            return tuple(float(v) for v in value)
        except (TypeError, ValueError):
            raise ConfigError(f"{where}: expected numbers, got {value!r}") from None
    if t == "int" or "int" == getattr(ftype, "__name__", None):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{where}: expected integer, got {value!r}")
        return int(value)
    if "str" in t and "float" not in t:
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected string, got {value!r}")
        return value
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected number, got {value!r}")
    return float(value)


def _read_section(section: str, raw: dict, fields: dict) -> dict:
    out = {}
    for key, value in raw.items():
        name, mult = split_unit(key)
        if name not in fields:
            raise ConfigError(f"unknown key {section}.{key}")
        v = _coerce(section, name, value, fields[name].type)
        if mult != 1.0 and v is not None:
            v = from_units(v, mult)
        out[name] = v
    return out


def config_from_dict(raw: dict) -> Config:
    unknown = set(raw) - {"device", "link", "ligand", "preset"}
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {sorted(unknown)}")
    preset_name = raw.get("preset")
    base = dict(PRESETS[preset_name]) if preset_name else {}
    if preset_name and preset_name not in PRESETS:
        raise ConfigError(f"unknown preset {preset_name!r}")
    dev_kw = dict(base, **_read_section("device", raw.get("device", {}), _DEVICE_FIELDS))
    link_kw = _read_section("link", raw.get("link", {}), _LINK_FIELDS)
    ligands = []
    for i, lr in enumerate(raw.get("ligand", [])):
        kw = _read_section(f"ligand[{i}]", lr, _LIGAND_FIELDS)
        for req in ("conc0", "k_on", "k_off", "mw"):
            if req not in kw:
                raise ConfigError(f"missing key ligand[{i}].{req}")
        kw.setdefault("name", f"ligand{i}")
        kw.setdefault("role", "target" if i == 0 else "interferer")
        ligands.append(LigandSpec(**kw))
    if not ligands and "ligand" not in raw:
        ligands = list(default_ligands())
    defaulted = _defaulted_device_keys(dev_kw)
    for k in defaulted:
        logger.debug("device.%s defaulted to %r", k, getattr(DeviceConfig, k, None))
    return Config(device=DeviceConfig(**dev_kw), ligands=tuple(ligands),
                  link=LinkSettings(**link_kw), preset=preset_name,
                  defaulted=defaulted)


def load_config(path: str | Path) -> Config:
    """Read and validate a TOML config file."""
    path = Path(path)
    try:
        raw = tomli.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    return config_from_dict(raw)


def config_to_dict(cfg: Config) -> dict:
    """Plain-dict form of ``cfg`` in SI units; inverse of :func:`config_from_dict`."""
    dev = {k: v for k, v in dataclasses.asdict(cfg.device).items() if v is not None}
    link = {k: (list(v) if isinstance(v, tuple) else v)
            for k, v in dataclasses.asdict(cfg.link).items() if v is not None}
    out: dict[str, Any] = {"device": dev, "link": link,
                           "ligand": [dataclasses.asdict(l) for l in cfg.ligands]}
    if cfg.preset:
        out = {"preset": cfg.preset, **out}
    return out


def dump_config(cfg: Config) -> str:
    return tomli_w.dumps(config_to_dict(cfg))


def save_config(cfg: Config, path: str | Path) -> None:
    Path(path).write_text(dump_config(cfg))


def from_units(value: float, mult: float) -> float:
    """Apply a unit multiplier. Sub-unit prefixes divide by the exact integer
    power of ten, so 100 nm lands on the same double as 1e-7."""
    if mult < 1.0:
        return value / round(1.0 / mult)
    return value * mult


def to_units(value: float, suffix: str) -> float:
    """Convert an SI value back into the unit named by ``suffix``."""
    mult = UNIT_SUFFIXES[suffix]
    if mult < 1.0:
        return value * round(1.0 / mult)
    return value / mult


# ---------------------------------------------------------------------------
# key paths ("device.NA", "ligand[1].conc0", "link.bits", "interferers.k_on")
#
# ``interferers.<field>`` addresses every interferer at once (reads return
# the first one). Ligands also accept the derived field ``K``: setting it
# keeps k_off and moves k_on to k_off/K.

def get_value(cfg: Config, key: str) -> Any:
    section, name, idx = _parse_key(key)
    if section == "device":
        obj = cfg.device
    elif section == "link":
        obj = cfg.link
    elif section == "interferers":
        if not cfg.interferers:
            raise ConfigError(f"{key}: configuration has no interferers")
        obj = cfg.interferers[0]
    else:
        obj = _ligand(cfg, idx, key)
    try:
        return getattr(obj, name)
    except AttributeError:
        raise ConfigError(f"unknown key {key!r}") from None


def _replace_ligand(lig: LigandSpec, name: str, value: Any, key: str) -> LigandSpec:
    if name == "K":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected number, got {value!r}")
        if not value > 0:
            raise ValidationError(f"constraint violated: {key} > 0")
        return dataclasses.replace(lig, k_on=lig.k_off / float(value))
    if name not in _LIGAND_FIELDS:
        raise ConfigError(f"unknown key {key}")
    return dataclasses.replace(lig, **{name: _coerce("ligand", name, value,
                                                     _LIGAND_FIELDS[name].type)})


def set_value(cfg: Config, key: str, value: Any) -> Config:
    """Return a copy of ``cfg`` with ``key`` replaced (value in SI or via suffix)."""
    section, name, idx = _parse_key(key)
    base, mult = split_unit(name)
    if mult != 1.0 and not isinstance(value, bool) and isinstance(value, (int, float)):
        value = from_units(value, mult)
    if section in ("ligand", "interferers"):
        ligs = list(cfg.ligands)
        if section == "ligand":
            targets = [idx]
            _ligand(cfg, idx, key)
        else:
            targets = [i for i, l in enumerate(ligs) if l.role == "interferer"]
            if not targets:
                raise ConfigError(f"{key}: configuration has no interferers")
        for i in targets:
            ligs[i] = _replace_ligand(ligs[i], base, value, key)
        return dataclasses.replace(cfg, ligands=tuple(ligs))
    fields, obj = ((_DEVICE_FIELDS, cfg.device) if section == "device"
                   else (_LINK_FIELDS, cfg.link))
    if base not in fields:
        raise ConfigError(f"unknown key {key}")
    v = _coerce(section, base, value, fields[base].type)
    new = dataclasses.replace(obj, **{base: v})
    if section == "device":
        return dataclasses.replace(cfg, device=new,
                                   defaulted=tuple(d for d in cfg.defaulted if d != base))
    return dataclasses.replace(cfg, link=new)


def _ligand(cfg: Config, idx: int, key: str) -> LigandSpec:
    if not 0 <= idx < len(cfg.ligands):
        raise ConfigError(f"{key}: ligand index out of range "
                          f"(have {len(cfg.ligands)} ligands)")
    return cfg.ligands[idx]


def parse_assignment(text: str) -> tuple[str, Any]:
    """Parse a ``key=value`` override; the value is read as a TOML literal."""
    if "=" not in text:
        raise ConfigError(f"override must look like key=value, got {text!r}")
    key, raw = text.split("=", 1)
    key, raw = key.strip(), raw.strip()
    try:
        value = tomli.loads(f"v = {raw}")["v"]
    except tomli.TOMLDecodeError:
        value = raw
    return key, value


def _parse_key(key: str) -> tuple[str, str, int | None]:
    if "." not in key:
        # bare names resolve to device, then link
        if split_unit(key)[0] in _DEVICE_FIELDS:
            return "device", key, None
        if split_unit(key)[0] in _LINK_FIELDS:
            return "link", key, None
        raise ConfigError(f"unknown key {key}")
    head, name = key.split(".", 1)
    if head in ("device", "link", "interferers"):
        return head, name, None
    if head.startswith("ligand[") and head.endswith("]"):
        try:
            idx = int(head[7:-1])
        except ValueError:
            raise ConfigError(f"bad ligand index in {key}") from None
        return "ligand", name, idx
    raise ConfigError(f"unknown key {key}")
