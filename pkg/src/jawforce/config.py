"""INI configuration shared by all commands.

Sections and keys are listed in ``docs/formats.md``. Unknown sections or
keys are rejected so that typos surface as errors naming the key.
"""

from __future__ import annotations

import configparser
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .core import N_CHANNELS, SensorGeometry
from .kinematics import DEFAULT_THETA_MIN_DEG, TransformChain, default_chain, read_chain
from .pipeline import MountAngles
from .sim import PoseConfig, SimConfig

ENV_VAR = "JAWFORCE_CONFIG"

GEOMETRY_KEYS = ("h_mm", "d_mm", "l_mm", "w_mm", "c_n_per_v", "lateral_range_n", "axial_range_n")
SIM_KEYS = ("preload_v", "crosstalk", "noise_sigma_v", "backlash_width_n",
            "redistribution_v_per_n", "seed")
PROFILE_KEYS = ("step_n", "dwell_samples", "includes_unloading", "peak_x_n", "peak_y_n", "peak_z_n")
SCENARIO_KEYS = ("normal_force_n", "normal_force_left_n", "cycles", "duration_s",
                 "proximal_deg", "theta_g_deg", "theta_jaw_deg", "jaw_deficit_deg",
                 "pose_error_deg", "sway_deg")
KINEMATICS_KEYS = ("chain", "theta_r_deg", "theta_l_deg", "theta_min_deg")

SECTIONS = {
    "geometry": GEOMETRY_KEYS, "sim": SIM_KEYS, "sim.left": SIM_KEYS, "sim.right": SIM_KEYS,
    "profile": PROFILE_KEYS, "scenario": SCENARIO_KEYS, "kinematics": KINEMATICS_KEYS,
}


class ConfigError(ValueError):
    def __init__(self, key: str, message: str):
        super().__init__(f"config key {key!r}: {message}")
        self.key = key


def _floats(text: str, key: str) -> list[float]:
    try:
        values = [float(x) for x in text.replace(",", " ").split()]
    except ValueError:
        raise ConfigError(key, f"expected numbers, got {text!r}") from None
    if not values or not all(math.isfinite(x) for x in values):
        raise ConfigError(key, f"expected finite numbers, got {text!r}")
    return values


@dataclass
class Config:
    sections: dict[str, dict[str, str]] = field(default_factory=dict)
    path: Optional[Path] = None

    def get(self, section: str, key: str) -> Optional[str]:
        return self.sections.get(section, {}).get(key)

    def number(self, section: str, key: str, default: float) -> float:
        raw = self.get(section, key)
        if raw is None:
            return default
        values = _floats(raw, f"{section}.{key}")
        if len(values) != 1:
            raise ConfigError(f"{section}.{key}", "expected a single number")
        return values[0]

    def integer(self, section: str, key: str, default: int) -> int:
        raw = self.get(section, key)
        if raw is None:
            return default
        try:
            return int(raw)
        except ValueError:
            raise ConfigError(f"{section}.{key}", f"expected an integer, got {raw!r}") from None

    def boolean(self, section: str, key: str, default: bool) -> bool:
        raw = self.get(section, key)
        if raw is None:
            return default
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{section}.{key}", f"expected a boolean, got {raw!r}")

    def vector(self, section: str, key: str, sizes: tuple[int, ...]):
        raw = self.get(section, key)
        if raw is None:
            return None
        values = _floats(raw, f"{section}.{key}")
        if len(values) not in sizes:
            raise ConfigError(f"{section}.{key}", f"expected {' or '.join(map(str, sizes))} values, "
                                                  f"got {len(values)}")
        return values[0] if len(values) == 1 else values

    # --- typed views ---------------------------------------------------------

    def geometry(self) -> SensorGeometry:
        base = SensorGeometry()
        kwargs = {k: self.number("geometry", k, getattr(base, k)) for k in GEOMETRY_KEYS}
        try:
            return SensorGeometry(**kwargs)
        except ValueError as exc:
            raise ConfigError("geometry", str(exc)) from None

    def _sim_value(self, sensor: Optional[str], key: str):
        for section in ((f"sim.{sensor}",) if sensor else ()) + ("sim",):
            if self.get(section, key) is not None:
                return section
        return None

    def sim(self, sensor: Optional[str] = None) -> SimConfig:
        """SimConfig from [sim], overridden by [sim.left] or [sim.right]."""
        kwargs: dict = {"geom": self.geometry()}
        sec = self._sim_value(sensor, "preload_v")
        if sec:
            kwargs["preload_v"] = self.vector(sec, "preload_v", (1, N_CHANNELS))
        sec = self._sim_value(sensor, "noise_sigma_v")
        if sec:
            kwargs["noise_sigma_v"] = self.vector(sec, "noise_sigma_v", (1, N_CHANNELS))
        sec = self._sim_value(sensor, "backlash_width_n")
        if sec:
            kwargs["backlash_width_n"] = self.vector(sec, "backlash_width_n", (1, 3))
        sec = self._sim_value(sensor, "redistribution_v_per_n")
        if sec:
            kwargs["redistribution_v_per_n"] = self.number(sec, "redistribution_v_per_n", 0.0)
        sec = self._sim_value(sensor, "seed")
        if sec:
            kwargs["seed"] = self.integer(sec, "seed", 0)
        sec = self._sim_value(sensor, "crosstalk")
        if sec:
            raw = self.get(sec, "crosstalk")
            if raw.strip().lower() != "identity":
                values = _floats(raw, f"{sec}.crosstalk")
                if len(values) != N_CHANNELS ** 2:
                    raise ConfigError(f"{sec}.crosstalk", "expected 'identity' or 64 numbers")
                kwargs["crosstalk"] = np.array(values).reshape(N_CHANNELS, N_CHANNELS)
        try:
            return SimConfig(**kwargs)
        except ValueError as exc:
            raise ConfigError(f"sim{'.' + sensor if sensor else ''}", str(exc)) from None

    def chain(self, override: Optional[str] = None) -> TransformChain:
        path = override or self.get("kinematics", "chain")
        if path is None:
            return default_chain()
        p = Path(path)
        if not p.is_absolute() and self.path is not None and override is None:
            p = self.path.parent / p
        return read_chain(p)

    def mounts(self) -> MountAngles:
        d = MountAngles()
        return MountAngles(
            math.radians(self.number("kinematics", "theta_r_deg", math.degrees(d.theta_r))),
            math.radians(self.number("kinematics", "theta_l_deg", math.degrees(d.theta_l))))

    def theta_min_deg(self) -> float:
        return self.number("kinematics", "theta_min_deg", DEFAULT_THETA_MIN_DEG)

    def pose(self, chain: TransformChain) -> PoseConfig:
        d = PoseConfig(chain=chain)
        m = self.mounts()
        prox = self.vector("scenario", "proximal_deg", (5,))
        deg = math.radians
        return PoseConfig(
            chain=chain,
            proximal_rad=[deg(x) for x in prox] if prox else d.proximal_rad,
            theta_g_rad=deg(self.number("scenario", "theta_g_deg", math.degrees(d.theta_g_rad))),
            theta_r_rad=m.theta_r, theta_l_rad=m.theta_l,
            theta_jaw_rad=deg(self.number("scenario", "theta_jaw_deg",
                                          math.degrees(d.theta_jaw_rad))),
            jaw_deficit_rad=deg(self.number("scenario", "jaw_deficit_deg",
                                            math.degrees(d.jaw_deficit_rad))),
            pose_error_rad=deg(self.number("scenario", "pose_error_deg", 0.0)),
            sway_rad=deg(self.number("scenario", "sway_deg", 0.0)),
        )


def load_config(path: Optional[str] = None) -> Config:
    """Read ``path``, else $JAWFORCE_CONFIG, else return the defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return Config()
    p = Path(path)
    if not p.is_file():
        raise ConfigError("config", f"file not found: {p}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(p)
    except configparser.Error as exc:
        raise ConfigError("config", f"cannot parse {p}: {exc}") from None
    sections: dict[str, dict[str, str]] = {}
    for name in parser.sections():
        if name not in SECTIONS:
            raise ConfigError(name, "unknown section")
        for key, value in parser.items(name):
            if key not in SECTIONS[name]:
                raise ConfigError(f"{name}.{key}", "unknown key")
        sections[name] = dict(parser.items(name))
    return Config(sections, p)
