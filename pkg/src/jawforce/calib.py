"""Least-squares calibration of the affine 3x9 sensitivity matrix and the
calibration quality metrics (RMSE, NRMSD, R^2, loading/unloading hysteresis).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, Mapping, Optional, Sequence, Union

import numpy as np

from .core import N_CHANNELS, ChannelFrame, ForceVector, SensorGeometry, ideal_sensitivity

Phase = Literal["load", "unload"]
AxisLabel = Literal["x", "y", "z", "mixed"]

PHASES = ("load", "unload")
AXIS_LABELS = ("x", "y", "z", "mixed")
AXES = ("x", "y", "z")
HYSTERESIS_KEYS = ("x+", "x-", "y+", "y-", "z+", "z-")

SENSITIVITY_HEADER = "# jawforce-sensitivity v1"

# Reference force increments used when loading the sensor during calibration.
DEFAULT_BIN_N = 0.5


class CalibrationError(ValueError):
    pass


class RankDeficient(CalibrationError):
    """The design matrix (or the reference excitation) does not span enough
    directions to determine the sensitivity matrix."""


class TooFewSamples(CalibrationError):
    pass


class LengthMismatch(ValueError):
    pass


class Empty(ValueError):
    pass


class MissingPhase(ValueError):
    pass


@dataclass(frozen=True)
class CalibrationSample:
    frame: ChannelFrame
    ref_force: ForceVector
    phase: Phase
    axis_label: AxisLabel

    def __post_init__(self) -> None:
        if self.phase not in PHASES:
            raise ValueError(f"phase must be one of {PHASES}, got {self.phase!r}")
        if self.axis_label not in AXIS_LABELS:
            raise ValueError(f"axis_label must be one of {AXIS_LABELS}, got {self.axis_label!r}")


@dataclass(frozen=True)
class SensitivityMatrix:
    """Affine map F = A+ [v1..v8, 1]^T. The last column holds the offsets (N)."""

    a_plus: np.ndarray
    geom: SensorGeometry = field(default_factory=SensorGeometry)

    def __post_init__(self) -> None:
        a = np.array(self.a_plus, dtype=float)
        if a.shape != (3, N_CHANNELS + 1):
            raise ValueError(f"sensitivity matrix must be 3x9, got {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("sensitivity matrix entries must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a_plus", a)

    @classmethod
    def ideal(cls, geom: SensorGeometry | None = None,
              offset: Sequence[float] = (0.0, 0.0, 0.0)) -> "SensitivityMatrix":
        geom = geom or SensorGeometry()
        a = np.hstack([ideal_sensitivity(geom), np.asarray(offset, float).reshape(3, 1)])
        return cls(a, geom)

    @property
    def gain(self) -> np.ndarray:
        return self.a_plus[:, :N_CHANNELS]

    @property
    def offset(self) -> np.ndarray:
        return self.a_plus[:, N_CHANNELS]

    def apply_many(self, voltages: np.ndarray) -> np.ndarray:
        """Forces (N, 3) for an (N, 8) voltage array."""
        v = np.asarray(voltages, dtype=float)
        return v @ self.gain.T + self.offset


def apply(s: SensitivityMatrix, frame: ChannelFrame) -> ForceVector:
    return ForceVector.from_array(s.gain @ frame.as_array() + s.offset)


# --- datasets ---------------------------------------------------------------

def sample_arrays(samples: Sequence[CalibrationSample]) -> tuple[np.ndarray, np.ndarray]:
    """Stack samples into voltages (N, 8) and reference forces (N, 3)."""
    v = np.array([s.frame.v for s in samples], dtype=float).reshape(-1, N_CHANNELS)
    f = np.array([(s.ref_force.fx, s.ref_force.fy, s.ref_force.fz) for s in samples],
                 dtype=float).reshape(-1, 3)
    return v, f


def design_matrix(voltages: np.ndarray) -> np.ndarray:
    v = np.asarray(voltages, dtype=float)
    return np.hstack([v, np.ones((v.shape[0], 1))])


def fit_sensitivity(samples: Sequence[CalibrationSample],
                    geom: SensorGeometry | None = None) -> SensitivityMatrix:
    """Least-squares fit of A+ minimising sum ||F_ref - A+ [v; 1]||^2.

    Solved through a Householder QR factorisation of the design matrix, so
    the normal equations are never formed.

    Raises:
        TooFewSamples: fewer than nine samples.
        RankDeficient: the 9-column design matrix is rank deficient.
    """
    geom = geom or SensorGeometry()
    n_cols = N_CHANNELS + 1
    if len(samples) < n_cols:
        raise TooFewSamples(f"need at least {n_cols} samples, got {len(samples)}")
    v, f = sample_arrays(samples)
    d = design_matrix(v)
    rank = int(np.linalg.matrix_rank(d))
    if rank < n_cols:
        raise RankDeficient(
            f"design matrix rank {rank} < {n_cols}; excite more axes or load levels")
    q, r = np.linalg.qr(d, mode="reduced")
    # R is upper triangular and well posed after the rank check.
    coef = np.linalg.solve(r, q.T @ f)
    return SensitivityMatrix(coef.T, geom)


def check_excitation(samples: Sequence[CalibrationSample], tol: float = 1e-9) -> None:
    """Raise RankDeficient unless the reference forces vary along all three axes.

    fit_sensitivity only needs a full-rank design; noisy data from a
    single-axis load still passes that test while leaving two force rows
    fitted to noise alone.
    """
    _, f = sample_arrays(samples)
    if f.shape[0] < 2:
        raise RankDeficient("reference forces do not excite any axis")
    centred = f - f.mean(axis=0)
    s = np.linalg.svd(centred, compute_uv=False)
    scale = max(float(s[0]), 1.0)
    rank = int(np.sum(s > tol * scale))
    if rank < 3:
        raise RankDeficient(
            f"reference forces excite only {rank} independent axis direction(s); "
            "add calibration runs along the missing axes")


# --- metrics ----------------------------------------------------------------

ForceSeq = Union[np.ndarray, Sequence[ForceVector], Sequence[Sequence[float]]]


def as_force_array(forces: ForceSeq) -> np.ndarray:
    if isinstance(forces, np.ndarray):
        a = forces.astype(float, copy=False)
    else:
        rows = [f.as_array() if isinstance(f, ForceVector) else f for f in forces]
        a = np.array(rows, dtype=float)
    if a.size == 0:
        return a.reshape(0, 3)
    return a.reshape(-1, 3) if a.ndim == 1 else a


def _paired(pred: ForceSeq, truth: ForceSeq) -> tuple[np.ndarray, np.ndarray]:
    p, t = as_force_array(pred), as_force_array(truth)
    if p.shape != t.shape:
        raise LengthMismatch(f"prediction shape {p.shape} != truth shape {t.shape}")
    if p.shape[0] == 0:
        raise Empty("metrics need at least one sample")
    return p, t


def rmse(pred: ForceSeq, truth: ForceSeq) -> np.ndarray:
    """Per-axis root mean square error (N)."""
    p, t = _paired(pred, truth)
    return np.sqrt(np.mean((p - t) ** 2, axis=0))


def max_error(pred: ForceSeq, truth: ForceSeq) -> np.ndarray:
    p, t = _paired(pred, truth)
    return np.max(np.abs(p - t), axis=0)


def nrmsd(rmse_n: Sequence[float], geom: SensorGeometry | None = None) -> np.ndarray:
    """RMSE as a percentage of the peak-to-peak target range of each axis."""
    geom = geom or SensorGeometry()
    span = 2.0 * np.array(geom.ranges_n)
    return 100.0 * np.asarray(rmse_n, dtype=float) / span


def r_squared(pred: ForceSeq, truth: ForceSeq) -> tuple[Optional[float], ...]:
    """Per-axis coefficient of determination, None where truth has no variance."""
    p, t = _paired(pred, truth)
    if p.shape[0] < 2:
        raise Empty("r_squared needs at least two samples")
    ss_res = np.sum((t - p) ** 2, axis=0)
    ss_tot = np.sum((t - t.mean(axis=0)) ** 2, axis=0)
    return tuple(None if tot == 0.0 else float(1.0 - res / tot)
                 for res, tot in zip(ss_res, ss_tot))


def loop_hysteresis(ref_magnitude: Sequence[float], measured: Sequence[float],
                    phases: Sequence[str], bin_n: float = DEFAULT_BIN_N) -> float:
    """Hysteresis (%) of one loading/unloading loop along a single axis.

    Samples are put into reference bins of width ``bin_n``; the bin index is
    round(|ref| / bin_n). Within a bin the measured values of each phase are
    averaged (dwell repetitions collapse to one point). The result is the
    largest load/unload difference over bins seen in both phases, divided by
    the largest absolute binned measured value.
    """
    ref = np.abs(np.asarray(ref_magnitude, dtype=float))
    meas = np.asarray(measured, dtype=float)
    ph = np.asarray(phases)
    if not (ref.shape == meas.shape == ph.shape):
        raise LengthMismatch("ref, measured and phases must have equal lengths")
    if not np.any(ph == "load") or not np.any(ph == "unload"):
        raise MissingPhase("loop needs both loading and unloading samples")
    bins = np.rint(ref / bin_n).astype(np.int64)
    means: dict[str, dict[int, float]] = {}
    for phase in PHASES:
        sel = ph == phase
        keys, inv = np.unique(bins[sel], return_inverse=True)
        sums = np.bincount(inv, weights=meas[sel])
        counts = np.bincount(inv)
        means[phase] = dict(zip(keys.tolist(), (sums / counts).tolist()))
    common = sorted(set(means["load"]) & set(means["unload"]))
    if not common:
        raise MissingPhase("no reference bin is visited during both loading and unloading")
    peak = max(abs(x) for phase in PHASES for x in means[phase].values())
    if peak == 0.0:
        return 0.0
    worst = max(abs(means["load"][k] - means["unload"][k]) for k in common)
    return 100.0 * worst / peak


def _group_signs(axis_idx: np.ndarray, ref: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Sign (+1/-1, or 0 if unknown) of the run each sample belongs to.

    Zero-reference samples inherit the sign of their run: the next nonzero
    sample for loading (loading starts at rest) and the previous one for
    unloading (unloading ends at rest).
    """
    n = len(ref)
    raw = np.sign(ref[np.arange(n), np.clip(axis_idx, 0, 2)])
    raw[axis_idx < 0] = 0
    signs = raw.copy()
    for i in np.flatnonzero((raw == 0) & (axis_idx >= 0)):
        step = 1 if phases[i] == "load" else -1
        j = i + step
        while 0 <= j < n:
            if axis_idx[j] == axis_idx[i] and raw[j] != 0:
                signs[i] = raw[j]
                break
            if axis_idx[j] != axis_idx[i]:
                break
            j += step
    return signs


def hysteresis(samples: Sequence[CalibrationSample], fitted: SensitivityMatrix,
               bin_n: float = DEFAULT_BIN_N, strict: bool = True
               ) -> dict[str, Optional[float]]:
    """Per-axis, per-sign hysteresis (%) of the fitted sensor output.

    Groups are formed from samples labelled x, y or z, split by the sign of
    the reference force along that axis. Groups without samples are omitted.

    Raises:
        MissingPhase: a group lacks loading or unloading data (``strict``);
            otherwise such groups map to None.
    """
    v, ref = sample_arrays(samples)
    meas = fitted.apply_many(v)
    labels = np.array([s.axis_label for s in samples])
    phases = np.array([s.phase for s in samples])
    axis_idx = np.array([AXES.index(a) if a in AXES else -1 for a in labels])
    signs = _group_signs(axis_idx, ref, phases)
    out: dict[str, Optional[float]] = {}
    for key in HYSTERESIS_KEYS:
        ax = AXES.index(key[0])
        sgn = 1 if key[1] == "+" else -1
        sel = (axis_idx == ax) & (signs == sgn)
        if not np.any(sel):
            continue
        try:
            out[key] = loop_hysteresis(ref[sel, ax], meas[sel, ax], phases[sel], bin_n)
        except MissingPhase as exc:
            if strict:
                raise MissingPhase(f"group {key}: {exc}") from None
            out[key] = None
    return out


@dataclass(frozen=True)
class CalibrationReport:
    rmse_n: tuple[float, float, float]
    nrmsd_pct: tuple[float, float, float]
    r2: tuple[Optional[float], Optional[float], Optional[float]]
    hysteresis_pct: Mapping[str, Optional[float]]

    def rows(self) -> list[tuple[str, str, Optional[float]]]:
        """Flat (metric, column, value) rows: rmse, nrmsd, r2 per axis, then hysteresis per group."""
        out: list[tuple[str, str, Optional[float]]] = []
        for name, values in (("rmse_n", self.rmse_n), ("nrmsd_pct", self.nrmsd_pct),
                             ("r2", self.r2)):
            out += [(name, ax, val) for ax, val in zip(AXES, values)]
        out += [("hysteresis_pct", key, self.hysteresis_pct.get(key))
                for key in HYSTERESIS_KEYS]
        return out


def calibration_report(samples: Sequence[CalibrationSample], fitted: SensitivityMatrix,
                       bin_n: float = DEFAULT_BIN_N) -> CalibrationReport:
    v, ref = sample_arrays(samples)
    pred = fitted.apply_many(v)
    e = rmse(pred, ref)
    return CalibrationReport(
        rmse_n=tuple(float(x) for x in e),
        nrmsd_pct=tuple(float(x) for x in nrmsd(e, fitted.geom)),
        r2=r_squared(pred, ref),
        hysteresis_pct=hysteresis(samples, fitted, bin_n, strict=False),
    )


# --- sensitivity file -------------------------------------------------------

def format_sensitivity(s: SensitivityMatrix) -> str:
    lines = [SENSITIVITY_HEADER]
    lines += [" ".join(f"{x:.17g}" for x in row) for row in s.a_plus]
    return "\n".join(lines) + "\n"


def write_sensitivity(path: Union[str, Path], s: SensitivityMatrix) -> None:
    Path(path).write_text(format_sensitivity(s))


def parse_sensitivity(text: str, geom: SensorGeometry | None = None) -> SensitivityMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].strip() != SENSITIVITY_HEADER:
        raise ValueError(f"missing header line {SENSITIVITY_HEADER!r}")
    rows = lines[1:]
    if len(rows) != 3:
        raise ValueError(f"expected 3 matrix rows (x, y, z), got {len(rows)}")
    values = []
    for lineno, row in enumerate(rows, start=2):
        fields = row.split()
        if len(fields) != N_CHANNELS + 1:
            raise ValueError(f"line {lineno}: expected {N_CHANNELS + 1} columns, got {len(fields)}")
        try:
            nums = [float(x) for x in fields]
        except ValueError:
            raise ValueError(f"line {lineno}: non-numeric entry") from None
        if not all(math.isfinite(x) for x in nums):
            raise ValueError(f"line {lineno}: non-finite entry")
        values.append(nums)
    return SensitivityMatrix(np.array(values), geom or SensorGeometry())


def read_sensitivity(path: Union[str, Path], geom: SensorGeometry | None = None
                     ) -> SensitivityMatrix:
    return parse_sensitivity(Path(path).read_text(), geom)


def concat_samples(groups: Iterable[Sequence[CalibrationSample]]) -> list[CalibrationSample]:
    out: list[CalibrationSample] = []
    for g in groups:
        out.extend(g)
    return out
