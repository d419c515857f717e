"""CSV schemas for single-jaw calibration logs, dual-jaw logs and force
streams, plus resampling of two force streams onto a common time grid.

Numbers are written with 17 significant digits so that a write/parse cycle
reproduces every float bit for bit. The column tables live in
``docs/formats.md``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .calib import AXIS_LABELS, PHASES, CalibrationSample
from .core import N_CHANNELS, ChannelFrame, ForceVector

PathLike = Union[str, Path]

SINGLE_JAW_HEADER = (["t_s"] + [f"v{i}" for i in range(1, 9)]
                     + ["fx_ref", "fy_ref", "fz_ref", "phase", "axis"])
DUAL_JAW_BASE = (["t_s"] + [f"theta{i}" for i in range(1, 8)]
                 + ["theta_g", "theta_jaw_reported"]
                 + [f"vL{i}" for i in range(1, 9)] + [f"vR{i}" for i in range(1, 9)])
DUAL_TRUTH = ["fx_true", "fy_true", "fz_true"]
GRIP_TRUTH = ["fg_true"]
FORCE_STREAM_HEADER = ["t_s", "fx", "fy", "fz"]


class LogError(ValueError):
    pass


class SchemaError(LogError):
    pass


class MonotonicityError(LogError):
    pass


class NumericError(LogError):
    pass


class NoOverlap(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _num(text: str, lineno: int, column: str) -> float:
    try:
        x = float(text)
    except ValueError:
        raise NumericError(f"line {lineno}: column {column!r}: not a number: {text!r}") from None
    if not math.isfinite(x):
        raise NumericError(f"line {lineno}: column {column!r}: non-finite value {text!r}")
    return x


def _check_header(found: list[str], expected: Sequence[str], path: PathLike) -> None:
    if found == list(expected):
        return
    missing = [c for c in expected if c not in found]
    extra = [c for c in found if c not in expected]
    parts = []
    if missing:
        parts.append(f"missing column(s) {missing}")
    if extra:
        parts.append(f"unexpected column(s) {extra}")
    if not parts:
        parts.append("columns out of order")
    raise SchemaError(f"{path}: bad header: " + "; ".join(parts))


def _check_increasing(t: float, prev: Optional[float], lineno: int) -> None:
    if prev is not None and not t > prev:
        raise MonotonicityError(
            f"line {lineno}: timestamp {t!r} is not greater than previous {prev!r}")


# --- single jaw -----------------------------------------------------------------

@dataclass(frozen=True)
class SingleJawLog:
    samples: tuple[CalibrationSample, ...]

    def __post_init__(self) -> None:
        samples = tuple(self.samples)
        object.__setattr__(self, "samples", samples)
        prev = None
        for i, s in enumerate(samples):
            _check_increasing(s.frame.t_s, prev, i + 2)
            prev = s.frame.t_s
        labels = {s.axis_label for s in samples}
        if len(labels) > 1:
            raise SchemaError(f"a log carries one axis label (or 'mixed'), found {sorted(labels)}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self):
        return iter(self.samples)

    @property
    def axis_label(self) -> Optional[str]:
        return self.samples[0].axis_label if self.samples else None


def write_single_jaw(path: PathLike, log: Union[SingleJawLog, Iterable[CalibrationSample]]) -> None:
    if not isinstance(log, SingleJawLog):
        log = SingleJawLog(tuple(log))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SINGLE_JAW_HEADER)
        for s in log.samples:
            f = s.ref_force
            w.writerow([fmt(s.frame.t_s)] + [fmt(x) for x in s.frame.v]
                       + [fmt(f.fx), fmt(f.fy), fmt(f.fz), s.phase, s.axis_label])


def parse_single_jaw(path: PathLike) -> SingleJawLog:
    samples = []
    prev = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        _check_header(header, SINGLE_JAW_HEADER, path)
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(SINGLE_JAW_HEADER):
                raise SchemaError(f"line {lineno}: expected {len(SINGLE_JAW_HEADER)} fields, got {len(row)}")
            nums = [_num(x, lineno, c) for x, c in zip(row[:12], SINGLE_JAW_HEADER)]
            phase, axis = row[12], row[13]
            if phase not in PHASES:
                raise SchemaError(f"line {lineno}: phase must be one of {PHASES}, got {phase!r}")
            if axis not in AXIS_LABELS:
                raise SchemaError(f"line {lineno}: axis must be one of {AXIS_LABELS}, got {axis!r}")
            _check_increasing(nums[0], prev, lineno)
            prev = nums[0]
            samples.append(CalibrationSample(ChannelFrame(nums[0], tuple(nums[1:9])),
                                             ForceVector(*nums[9:12]), phase, axis))
    return SingleJawLog(tuple(samples))


# --- dual jaw ---------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DualJawLog:
    """Column arrays of a dual-jaw log.

    theta holds theta1..theta7 as logged (rad), theta_g the bisector angle,
    theta_jaw_reported the software-reported jaw opening. f_true is the
    optional ground-truth resultant in the base frame, fg_true the optional
    ground-truth grasp force.
    """

    t_s: np.ndarray
    theta: np.ndarray
    theta_g: np.ndarray
    theta_jaw_reported: np.ndarray
    v_left: np.ndarray
    v_right: np.ndarray
    f_true: Optional[np.ndarray] = None
    fg_true: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        n = len(self.t_s)
        shapes = {"theta": (n, 7), "theta_g": (n,), "theta_jaw_reported": (n,),
                  "v_left": (n, N_CHANNELS), "v_right": (n, N_CHANNELS)}
        for name, shape in (("t_s", (n,)), *shapes.items()):
            a = np.asarray(getattr(self, name), dtype=float)
            if a.shape != shape:
                raise SchemaError(f"{name} must have shape {shape}, got {a.shape}")
            object.__setattr__(self, name, a)
        for name, shape in (("f_true", (n, 3)), ("fg_true", (n,))):
            a = getattr(self, name)
            if a is not None:
                a = np.asarray(a, dtype=float)
                if a.shape != shape:
                    raise SchemaError(f"{name} must have shape {shape}, got {a.shape}")
                object.__setattr__(self, name, a)
        if n > 1 and not np.all(np.diff(self.t_s) > 0):
            k = int(np.flatnonzero(np.diff(self.t_s) <= 0)[0])
            raise MonotonicityError(f"row {k + 2}: timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.t_s)

    @property
    def columns(self) -> list[str]:
        cols = list(DUAL_JAW_BASE)
        if self.f_true is not None:
            cols += DUAL_TRUTH
        if self.fg_true is not None:
            cols += GRIP_TRUTH
        return cols

    def matrix(self) -> np.ndarray:
        parts = [self.t_s[:, None], self.theta, self.theta_g[:, None],
                 self.theta_jaw_reported[:, None], self.v_left, self.v_right]
        if self.f_true is not None:
            parts.append(self.f_true)
        if self.fg_true is not None:
            parts.append(self.fg_true[:, None])
        return np.hstack(parts)

    def equals(self, other: "DualJawLog") -> bool:
        """Bitwise equality of all columns."""
        return (self.columns == other.columns
                and np.array_equal(self.matrix(), other.matrix()))


def write_dual_jaw(path: PathLike, log: DualJawLog) -> None:
    m = log.matrix()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(log.columns)
        for row in m:
            w.writerow([fmt(x) for x in row])


def parse_dual_jaw(path: PathLike) -> DualJawLog:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        base = len(DUAL_JAW_BASE)
        _check_header(header[:base], DUAL_JAW_BASE, path)
        tail = header[base:]
        valid_tails = ([], DUAL_TRUTH, GRIP_TRUTH, DUAL_TRUTH + GRIP_TRUTH)
        if tail not in valid_tails:
            raise SchemaError(f"{path}: unexpected trailing columns {tail}")
        rows = []
        prev = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            nums = [_num(x, lineno, c) for x, c in zip(row, header)]
            _check_increasing(nums[0], prev, lineno)
            prev = nums[0]
            rows.append(nums)
    m = np.array(rows, dtype=float).reshape(-1, len(header))
    col = {name: i for i, name in enumerate(header)}
    f_true = m[:, [col[c] for c in DUAL_TRUTH]] if "fx_true" in col else None
    fg_true = m[:, col["fg_true"]] if "fg_true" in col else None
    return DualJawLog(
        t_s=m[:, 0], theta=m[:, 1:8], theta_g=m[:, 8], theta_jaw_reported=m[:, 9],
        v_left=m[:, 10:18], v_right=m[:, 18:26], f_true=f_true, fg_true=fg_true)


# --- force streams and alignment -------------------------------------------------

@dataclass(frozen=True, eq=False)
class ForceStream:
    """Timestamped force samples: t (N,) and f (N, 3) or (N,)."""

    t: np.ndarray
    f: np.ndarray

    def __post_init__(self) -> None:
        t = np.asarray(self.t, dtype=float)
        f = np.asarray(self.f, dtype=float)
        if t.ndim != 1 or f.shape[0] != t.shape[0]:
            raise ValueError("stream times and values must have matching lengths")
        if t.size == 0:
            raise ValueError("stream is empty")
        if np.any(np.diff(t) <= 0):
            raise MonotonicityError("stream timestamps must be strictly increasing")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "f", f)


@dataclass(frozen=True, eq=False)
class AlignedStreams:
    t: np.ndarray
    sensor: np.ndarray
    reference: np.ndarray


def _interp(t_grid: np.ndarray, s: ForceStream) -> np.ndarray:
    if s.f.ndim == 1:
        return np.interp(t_grid, s.t, s.f)
    return np.column_stack([np.interp(t_grid, s.t, s.f[:, j]) for j in range(s.f.shape[1])])


def align_streams(sensor: ForceStream, reference: ForceStream,
                  rate_hz: float = 125.0) -> AlignedStreams:
    """Linearly resample both streams onto a uniform grid at ``rate_hz``.

    The grid starts at the later of the two start times and never leaves
    the overlap of both streams, so nothing is extrapolated.
    """
    if not rate_hz > 0:
        raise ValueError("rate_hz must be > 0")
    t0 = float(max(sensor.t[0], reference.t[0]))
    t1 = float(min(sensor.t[-1], reference.t[-1]))
    if t0 > t1:
        raise NoOverlap(f"streams do not overlap: start {t0!r} > end {t1!r}")
    n = int(math.floor((t1 - t0) * rate_hz + 1e-9)) + 1
    grid = t0 + np.arange(n) / rate_hz
    grid = grid[grid <= t1]
    return AlignedStreams(grid, _interp(grid, sensor), _interp(grid, reference))


def write_force_stream(path: PathLike, t: np.ndarray, f: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FORCE_STREAM_HEADER)
        for ti, fi in zip(t, np.asarray(f, dtype=float).reshape(-1, 3)):
            w.writerow([fmt(ti)] + [fmt(x) for x in fi])


def parse_force_stream(path: PathLike) -> ForceStream:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SchemaError(f"{path}: empty file")
        _check_header(header, FORCE_STREAM_HEADER, path)
        rows = []
        prev = None
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise SchemaError(f"line {lineno}: expected 4 fields, got {len(row)}")
            nums = [_num(x, lineno, c) for x, c in zip(row, header)]
            _check_increasing(nums[0], prev, lineno)
            prev = nums[0]
            rows.append(nums)
    m = np.array(rows, dtype=float).reshape(-1, 4)
    return ForceStream(m[:, 0], m[:, 1:])
