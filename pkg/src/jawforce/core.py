"""Domain types and the ideal load-cell sensing model of one jaw sensor.

Each jaw sensor carries two opposing arrays of four compression load cells.
Cells 1-4 sit on the upper array and 5-8 on the lower one. Assuming the load
acts at the tip of the jaw attachment, the axial force follows from the
difference of the two arrays and the lateral forces from the moment balance
about the sensor x- and y-axes.

Units are N, mm, V and N*mm throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

N_CHANNELS = 8

# Sign patterns of the cell sums, indexed by channel 1..8.
_AXIAL_PATTERN = np.array([+1, +1, +1, +1, -1, -1, -1, -1], dtype=float)
_Y_MOMENT_PATTERN = np.array([0, +1, 0, -1, 0, +1, 0, -1], dtype=float)
_X_MOMENT_PATTERN = np.array([+1, 0, -1, 0, -1, 0, +1, 0], dtype=float)


@dataclass(frozen=True)
class SensorGeometry:
    """Physical constants and target ranges of one jaw sensor.

    h_mm is the lever arm from the jaw tip to the sensing plate, d_mm the
    lateral offset of the tip, l_mm and w_mm the cell row and column
    spacings, and c_n_per_v the amplified voltage-to-force factor.
    """

    h_mm: float = 15.85
    d_mm: float = 5.50
    l_mm: float = 3.45
    w_mm: float = 2.95
    c_n_per_v: float = 3.063
    lateral_range_n: float = 3.0
    axial_range_n: float = 5.0

    def __post_init__(self) -> None:
        for name in ("h_mm", "d_mm", "l_mm", "w_mm", "c_n_per_v",
                     "lateral_range_n", "axial_range_n"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def ranges_n(self) -> tuple[float, float, float]:
        """Symmetric per-axis bounds (x, y, z)."""
        return (self.lateral_range_n, self.lateral_range_n, self.axial_range_n)

    def scaled(self, k: float) -> "SensorGeometry":
        """Copy with every length multiplied by ``k``."""
        return SensorGeometry(self.h_mm * k, self.d_mm * k, self.l_mm * k,
                              self.w_mm * k, self.c_n_per_v,
                              self.lateral_range_n, self.axial_range_n)


@dataclass(frozen=True)
class ChannelFrame:
    """One timestamped sample of the eight amplified load-cell voltages."""

    t_s: float
    v: tuple[float, ...]

    def __post_init__(self) -> None:
        v = tuple(float(x) for x in self.v)
        if len(v) != N_CHANNELS:
            raise ValueError(f"expected {N_CHANNELS} channels, got {len(v)}")
        if not all(math.isfinite(x) for x in v):
            raise ValueError("channel voltages must be finite")
        if not math.isfinite(self.t_s):
            raise ValueError("timestamp must be finite")
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "t_s", float(self.t_s))

    def as_array(self) -> np.ndarray:
        return np.array(self.v, dtype=float)


@dataclass(frozen=True)
class ForceVector:
    """Force in the sensor local frame; x and y lateral, z axial (N)."""

    fx: float
    fy: float
    fz: float

    def __post_init__(self) -> None:
        if not all(math.isfinite(x) for x in (self.fx, self.fy, self.fz)):
            raise ValueError("force components must be finite")

    @classmethod
    def from_array(cls, a: Sequence[float]) -> "ForceVector":
        return cls(float(a[0]), float(a[1]), float(a[2]))

    def as_array(self) -> np.ndarray:
        return np.array([self.fx, self.fy, self.fz], dtype=float)


@dataclass(frozen=True)
class MomentPair:
    """Residual moments about the sensor x- and y-axes (N*mm)."""

    mx: float
    my: float


@lru_cache(maxsize=64)
def _ideal_sensitivity(geom: SensorGeometry) -> np.ndarray:
    c, h = geom.c_n_per_v, geom.h_mm
    row_z = c * _AXIAL_PATTERN
    row_y = (geom.l_mm * c / (2.0 * h)) * _Y_MOMENT_PATTERN
    row_x = (geom.d_mm / h) * row_z + (geom.w_mm * c / (2.0 * h)) * _X_MOMENT_PATTERN
    a = np.vstack([row_x, row_y, row_z])
    a.setflags(write=False)
    return a


def ideal_sensitivity(geom: SensorGeometry) -> np.ndarray:
    """Return the 3x8 map from channel voltages to (Fx, Fy, Fz).

    Obtained by setting both residual moments to zero (static equilibrium)
    and solving the two moment balances together with the axial force sum.
    The returned array is read-only.
    """
    return _ideal_sensitivity(geom)


def ideal_inverse(geom: SensorGeometry, frame: ChannelFrame) -> ForceVector:
    """Closed-form force estimate of one frame under static equilibrium."""
    return ForceVector.from_array(ideal_sensitivity(geom) @ frame.as_array())


def ideal_inverse_many(geom: SensorGeometry, voltages: np.ndarray) -> np.ndarray:
    """Vectorised :func:`ideal_inverse` over an (N, 8) array; returns (N, 3)."""
    v = np.asarray(voltages, dtype=float)
    return v @ ideal_sensitivity(geom).T


def moment_residual(geom: SensorGeometry, frame: ChannelFrame,
                    f: ForceVector) -> MomentPair:
    """Evaluate the two moment balances for a frame and a candidate force.

    Both components vanish when ``f`` is the ideal inverse of ``frame``.
    """
    v = frame.v
    c, h = geom.c_n_per_v, geom.h_mm
    mx = f.fy * h - 0.5 * geom.l_mm * c * (v[1] + v[5] - v[3] - v[7])
    my = (f.fx * h - f.fz * geom.d_mm
          - 0.5 * geom.w_mm * c * (v[0] + v[6] - v[2] - v[4]))
    return MomentPair(mx, my)
