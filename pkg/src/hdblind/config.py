"""Flat, namespaced run configuration.

Keys look like ``detector.eta``. Values are resolved in order: built-in
defaults, then the chosen preset, then a TOML file, then ``--set`` overrides.
Unknown keys are rejected at every stage.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import replace
from typing import Any, Mapping

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .keyrate import optimize_va
from .mc import LoCharacterization, SimScenario
from .model import AttackModel, ChannelModel, DetectorModel, ProtocolModel

DEFAULTS: dict[str, Any] = {
    "protocol.v_a": "auto",
    "protocol.beta": 0.95,
    "protocol.xi_assumed": 0.01,
    "detector.eta": 0.6,
    "detector.v_ele": 0.01,
    "detector.t_lo": 0.5,
    "detector.i_lo": 1e8,
    "detector.f_lo": 0.001,
    "detector.alpha_hi": 20.0,
    "detector.alpha_lo": -20.0,
    "channel.length_km": 25.0,
    "channel.loss_db_per_km": 0.21,
    "channel.xi": 0.0,
    "attack.active": True,
    "attack.r": 0.1274,
    "attack.t_ext": 0.49,
    "attack.f_ext": 0.001,
    "attack.xi_tech": 0.1,
    "sim.seed": 1,
    "sim.n": 1_000_000,
    "sim.clipping": True,
    "sim.partitions": 1,
    "sim.workers": 1,
    "guard.s_hi": 19.0,
    "guard.s_lo": -19.0,
    "guard.max_fraction": 1e-3,
    "guard.block_size": 100_000,
    "guard.n_blocks": 100,
    "fig2.gain_v": 2.0e-6,
    "fig2.rate_hz": 1e6,
    "fig2.wavelength_nm": 1550.0,
    "fig2.daq_limit_v": 0.5,
    "fig2.v_ele_v2": 1e-5,
    "fig2.epsilon_1": 0.0012,
    "fig2.epsilon_2": 0.0012 * 45.0 / 35.0,
    "fig2.power_max_uw": 80.0,
    "fig2.power_step_uw": 1.0,
    "fig2.n_per_point": 100_000,
    "fig3.r_max": 0.2,
    "fig3.r_step": 0.005,
    "fig3.f_ext_1": 0.001,
    "fig3.f_ext_2": 0.02,
    "fig4.scatter_points": 100_000,
    "fig5.l_grid": (0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0),
    "fig5.r_list": (0.10, 0.11, 0.12, 0.13, 0.14),
    "fig6.l_list": (20.0, 25.0, 30.0, 35.0, 40.0),
    "fig6.r_coarse_max": 0.14,
    "fig6.r_coarse_step": 0.01,
    "fig6.r_fine_min": 0.124,
    "fig6.r_fine_max": 0.130,
    "fig6.r_fine_step": 0.0005,
}

PRESETS: dict[str, dict[str, Any]] = {
    "default": {},
    "fig4a-r0.10": {"attack.r": 0.10, "sim.n": 10_000_000},
    "fig4a-r0.11": {"attack.r": 0.11, "sim.n": 10_000_000},
    "fig4b": {"attack.r": 0.1274, "sim.n": 10_000_000},
    "fig6": {"detector.eta": 0.55},
    "honest": {"attack.active": False},
}


def _coerce(key: str, value: Any) -> Any:
    default = DEFAULTS[key]
    if key == "protocol.v_a":
        if isinstance(value, str) and value.strip().lower() == "auto":
            return "auto"
        return _to_float(key, value)
    if isinstance(default, bool):
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("true", "1", "yes", "on"):
            return True
        if isinstance(value, str) and value.lower() in ("false", "0", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {value!r}")
    if isinstance(default, int):
        f = _to_float(key, value)
        if f != int(f):
            raise ConfigError(f"{key}: expected an integer, got {value!r}")
        return int(f)
    if isinstance(default, float):
        return _to_float(key, value)
    if isinstance(default, tuple):
        items = value.split(",") if isinstance(value, str) else list(value)
        return tuple(_to_float(key, v) for v in items)
    return value


def _to_float(key, value):
    try:
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _flatten(tree: Mapping, prefix: str = "") -> dict:
    flat = {}
    for k, v in tree.items():
        name = f"{prefix}{k}"
        if isinstance(v, Mapping):
            flat.update(_flatten(v, name + "."))
        else:
            flat[name] = v
    return flat


def apply(cfg: dict, updates: Mapping[str, Any], source: str) -> dict:
    out = dict(cfg)
    for key, value in updates.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r} ({source})")
        out[key] = _coerce(key, value)
    return out


def load_file(path) -> dict:
    with open(path, "rb") as fh:
        try:
            tree = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    return _flatten(tree)


def parse_set(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def resolve(preset: str = "default", file=None, overrides: Mapping[str, Any] | None = None) -> dict:
    if preset not in PRESETS:
        raise ConfigError(f"unknown preset {preset!r}; choose from {', '.join(PRESETS)}")
    cfg = apply(DEFAULTS, PRESETS[preset], f"preset {preset}")
    if file is not None:
        cfg = apply(cfg, load_file(file), str(file))
    if overrides:
        cfg = apply(cfg, overrides, "override")
    return cfg


def canonical_json(cfg: Mapping) -> str:
    return json.dumps({k: cfg[k] for k in sorted(cfg)}, separators=(",", ":"))


def config_hash(cfg: Mapping) -> str:
    return hashlib.sha256(canonical_json(cfg).encode()).hexdigest()


def detector(cfg) -> DetectorModel:
    return DetectorModel(
        eta=cfg["detector.eta"],
        v_ele=cfg["detector.v_ele"],
        t_lo=cfg["detector.t_lo"],
        i_lo=cfg["detector.i_lo"],
        f_lo=cfg["detector.f_lo"],
        alpha_hi=cfg["detector.alpha_hi"],
        alpha_lo=cfg["detector.alpha_lo"],
    )


def channel(cfg, length_km: float | None = None) -> ChannelModel:
    return ChannelModel(
        length_km=cfg["channel.length_km"] if length_km is None else length_km,
        loss_db_per_km=cfg["channel.loss_db_per_km"],
        xi=cfg["channel.xi"],
    )


def attack(cfg, r: float | None = None) -> AttackModel:
    return AttackModel(
        active=cfg["attack.active"],
        r=cfg["attack.r"] if r is None else r,
        t_ext=cfg["attack.t_ext"],
        f_ext=cfg["attack.f_ext"],
        xi_tech=cfg["attack.xi_tech"],
    )


def resolve_v_a(cfg, length_km: float | None = None) -> float:
    """Configured V_A, or Alice's optimum for the nominal link when set to ``auto``."""
    if cfg["protocol.v_a"] != "auto":
        return cfg["protocol.v_a"]
    t = channel(cfg, length_km).transmission()
    return optimize_va(t, detector(cfg), cfg["protocol.xi_assumed"], cfg["protocol.beta"]).v_a


def scenario(cfg, length_km: float | None = None, r: float | None = None, **changes) -> SimScenario:
    scn = SimScenario(
        protocol=ProtocolModel(resolve_v_a(cfg, length_km), cfg["protocol.beta"]),
        detector=detector(cfg),
        channel=channel(cfg, length_km),
        attack=attack(cfg, r),
        clipping=cfg["sim.clipping"],
        seed=cfg["sim.seed"],
        n=cfg["sim.n"],
    )
    return replace(scn, **changes) if changes else scn


def lo_setup(cfg) -> LoCharacterization:
    return LoCharacterization(
        gain_v=cfg["fig2.gain_v"],
        rate_hz=cfg["fig2.rate_hz"],
        wavelength_nm=cfg["fig2.wavelength_nm"],
        daq_limit_v=cfg["fig2.daq_limit_v"],
        v_ele_v2=cfg["fig2.v_ele_v2"],
    )
