"""Synthetic jaw sensor used as the ground-truth oracle.

Forces are turned into channel voltages through the minimum-norm right
inverse of the ideal sensitivity matrix, then mixed by a crosstalk matrix,
shifted by the cell preloads and corrupted by Gaussian channel noise.

The ideal map has a five-dimensional null space: load can be shared among
the eight cells in ways that change no force. The simulator spreads a
random, load-proportional part of every sample over that null space
(``redistribution_v_per_n``). Without it, noise-free voltages would span
only three directions and no calibration fit could be full rank.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal, Optional, Sequence, Union

import numpy as np

from .calib import CalibrationSample
from .core import N_CHANNELS, ChannelFrame, ForceVector, SensorGeometry, ideal_sensitivity
from .io import DualJawLog
from .kinematics import (DEFAULT_THETA_MIN_DEG, JawState, TransformChain, default_chain,
                         gripper_frame, gripper_poses)

SAMPLE_RATE_HZ = 125.0
MAX_CROSSTALK_COND = 1e6

Axis = Literal["x", "y", "z"]
AXIS_INDEX = {"x": 0, "y": 1, "z": 2}


def _vector(value, n: int, name: str) -> tuple[float, ...]:
    a = np.broadcast_to(np.asarray(value, dtype=float), (n,)) if np.ndim(value) == 0 \
        else np.asarray(value, dtype=float)
    if a.shape != (n,):
        raise ValueError(f"{name} must be a scalar or have {n} entries, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} must be finite")
    return tuple(float(x) for x in a)


@dataclass(frozen=True, eq=False)
class SimConfig:
    geom: SensorGeometry = field(default_factory=SensorGeometry)
    preload_v: Sequence[float] = (0.0,) * N_CHANNELS
    crosstalk: Optional[np.ndarray] = None
    noise_sigma_v: Union[float, Sequence[float]] = 0.0
    backlash_width_n: Union[float, Sequence[float]] = 0.0
    redistribution_v_per_n: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "preload_v", _vector(self.preload_v, N_CHANNELS, "preload_v"))
        object.__setattr__(self, "noise_sigma_v",
                           _vector(self.noise_sigma_v, N_CHANNELS, "noise_sigma_v"))
        object.__setattr__(self, "backlash_width_n",
                           _vector(self.backlash_width_n, 3, "backlash_width_n"))
        if min(self.noise_sigma_v) < 0:
            raise ValueError("noise_sigma_v must be >= 0")
        if min(self.backlash_width_n) < 0:
            raise ValueError("backlash_width_n must be >= 0")
        if not (math.isfinite(self.redistribution_v_per_n) and self.redistribution_v_per_n >= 0):
            raise ValueError("redistribution_v_per_n must be finite and >= 0")
        x = np.eye(N_CHANNELS) if self.crosstalk is None else np.array(self.crosstalk, dtype=float)
        if x.shape != (N_CHANNELS, N_CHANNELS) or not np.all(np.isfinite(x)):
            raise ValueError("crosstalk must be a finite 8x8 matrix")
        if not np.linalg.cond(x) < MAX_CROSSTALK_COND:
            raise ValueError(f"crosstalk condition number must be < {MAX_CROSSTALK_COND:g}")
        x.setflags(write=False)
        object.__setattr__(self, "crosstalk", x)
        object.__setattr__(self, "seed", int(self.seed))

    def rng(self) -> np.random.Generator:
        return np.random.default_rng(self.seed)

    @cached_property
    def right_inverse(self) -> np.ndarray:
        """Minimum-norm G (8x3) with A_ideal G = I."""
        a = ideal_sensitivity(self.geom)
        return a.T @ np.linalg.inv(a @ a.T)

    @cached_property
    def null_basis(self) -> np.ndarray:
        """Orthonormal basis (8x5) of the null space of A_ideal."""
        _, _, vt = np.linalg.svd(ideal_sensitivity(self.geom))
        return vt[3:].T.copy()

    def true_sensitivity(self) -> np.ndarray:
        """The exact 3x9 map from this sensor's voltages back to force."""
        a = ideal_sensitivity(self.geom) @ np.linalg.inv(self.crosstalk)
        return np.hstack([a, -(a @ np.array(self.preload_v)).reshape(3, 1)])

    def force_noise_sigma(self) -> np.ndarray:
        """Per-axis force-equivalent noise of the ideal map (N)."""
        a = ideal_sensitivity(self.geom)
        return np.sqrt((a ** 2) @ np.array(self.noise_sigma_v) ** 2)


def synthesize_voltages(cfg: SimConfig, forces: np.ndarray,
                        rng: np.random.Generator) -> np.ndarray:
    """Channel voltages (N, 8) for commanded forces (N, 3)."""
    f = np.asarray(forces, dtype=float).reshape(-1, 3)
    n = f.shape[0]
    share = rng.standard_normal((n, N_CHANNELS - 3))
    noise = rng.standard_normal((n, N_CHANNELS))
    cells = f @ cfg.right_inverse.T
    load = np.linalg.norm(f, axis=1, keepdims=True)
    cells = cells + (cfg.redistribution_v_per_n * load) * (share @ cfg.null_basis.T)
    return cells @ cfg.crosstalk.T + np.array(cfg.preload_v) + noise * np.array(cfg.noise_sigma_v)


def synthesize_frame(cfg: SimConfig, f: ForceVector,
                     rng: Optional[np.random.Generator] = None, t_s: float = 0.0) -> ChannelFrame:
    rng = rng if rng is not None else cfg.rng()
    v = synthesize_voltages(cfg, f.as_array(), rng)[0]
    return ChannelFrame(t_s, tuple(v.tolist()))


def backlash(commanded: Sequence[float], half_width: float) -> np.ndarray:
    """Play operator on the load magnitude of one axis.

    Loading from rest follows the command; once the load decreases the
    measured side holds back until the command has dropped by 2 * half_width,
    so a full loop separates the two branches by 2 * half_width. A reversal
    through zero starts a fresh loop in the new direction.
    """
    x = np.asarray(commanded, dtype=float)
    if half_width == 0:
        return x.copy()
    gap = 2.0 * half_width
    out = np.empty_like(x)
    held = 0.0
    direction = 0.0
    for k, xk in enumerate(x):
        s = math.copysign(1.0, xk) if xk != 0 else direction
        if xk != 0 and direction != 0 and s != direction:
            held = 0.0
        m = abs(xk)
        held = max(m, min(m + gap, held))
        out[k] = s * held if s != 0 else 0.0
        direction = s
    return out


@dataclass(frozen=True)
class LoadProfile:
    axis: Axis
    peak_n: float
    step_n: float = 0.5
    includes_unloading: bool = True
    dwell_samples: int = 25
    sign: int = 1

    def __post_init__(self) -> None:
        if self.axis not in AXIS_INDEX:
            raise ValueError(f"axis must be x, y or z, got {self.axis!r}")
        if not (0 < self.step_n <= self.peak_n):
            raise ValueError("profile needs 0 < step_n <= peak_n")
        if self.dwell_samples < 1:
            raise ValueError("dwell_samples must be >= 1")
        if self.sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")

    def check_range(self, geom: SensorGeometry) -> None:
        limit = geom.ranges_n[AXIS_INDEX[self.axis]]
        if self.peak_n > limit:
            raise ValueError(f"peak {self.peak_n} N exceeds the {self.axis} range of {limit} N")

    def levels(self) -> tuple[list[float], list[float]]:
        """Commanded magnitudes of the loading and unloading steps."""
        n = int(math.floor(self.peak_n / self.step_n + 1e-9))
        up = [k * self.step_n for k in range(n + 1)]
        if self.peak_n - up[-1] > 1e-9:
            up.append(self.peak_n)
        else:
            up[-1] = self.peak_n
        down = up[-2::-1] if self.includes_unloading else []
        return up, down


def run_profile(cfg: SimConfig, profile: LoadProfile,
                rng: Optional[np.random.Generator] = None,
                t0: float = 0.0) -> list[CalibrationSample]:
    """Step the commanded force through the profile at 125 Hz.

    The reference force is the commanded force; the sensor sees the
    commanded force after the per-axis backlash operator.
    """
    profile.check_range(cfg.geom)
    rng = rng if rng is not None else cfg.rng()
    up, down = profile.levels()
    ax = AXIS_INDEX[profile.axis]
    mags = [(lvl, "load") for lvl in up] + [(lvl, "unload") for lvl in down]
    n = len(mags) * profile.dwell_samples
    commanded = np.zeros((n, 3))
    phases = []
    for i, (lvl, phase) in enumerate(mags):
        sl = slice(i * profile.dwell_samples, (i + 1) * profile.dwell_samples)
        commanded[sl, ax] = profile.sign * lvl
        phases += [phase] * profile.dwell_samples
    measured = np.column_stack([backlash(commanded[:, j], cfg.backlash_width_n[j])
                                for j in range(3)])
    volts = synthesize_voltages(cfg, measured, rng)
    t = t0 + np.arange(n) / SAMPLE_RATE_HZ
    return [CalibrationSample(ChannelFrame(float(t[k]), tuple(volts[k].tolist())),
                              ForceVector.from_array(commanded[k]), phases[k], profile.axis)
            for k in range(n)]


def calibration_runs(cfg: SimConfig, axes: Sequence[str] = ("x", "y", "z"),
                     step_n: float = 0.5, dwell_samples: int = 25,
                     peaks: Optional[dict[str, float]] = None,
                     includes_unloading: bool = True,
                     rng: Optional[np.random.Generator] = None) -> dict[str, list[CalibrationSample]]:
    """Positive then negative loading/unloading run for each axis.

    Peaks default to the full target range of each axis. One generator is
    threaded through all runs; time continues across runs of an axis.
    """
    rng = rng if rng is not None else cfg.rng()
    out: dict[str, list[CalibrationSample]] = {}
    for axis in axes:
        peak = (peaks or {}).get(axis, cfg.geom.ranges_n[AXIS_INDEX[axis]])
        samples: list[CalibrationSample] = []
        for sign in (1, -1):
            t0 = samples[-1].frame.t_s + 1.0 / SAMPLE_RATE_HZ if samples else 0.0
            prof = LoadProfile(axis, peak, step_n, includes_unloading, dwell_samples, sign)
            samples += run_profile(cfg, prof, rng, t0)
        out[axis] = samples
    return out


# --- dual-jaw scenarios --------------------------------------------------------

@dataclass(frozen=True, eq=False)
class PoseConfig:
    """Posture and jaw geometry used to generate dual-jaw logs.

    theta_jaw_rad is the true opening between the sensors while grasping.
    The reported opening falls short of it by up to jaw_deficit_rad as the
    grip force rises (tendon stretch). pose_error_rad bounds a constant error
    on the logged bisector angle. sway_rad is the amplitude of slow motion
    of the proximal joints.
    """

    chain: TransformChain = field(default_factory=default_chain)
    proximal_rad: Sequence[float] = (0.05, -0.08, 0.0, 0.15, 0.06)
    theta_g_rad: float = 0.04
    theta_r_rad: float = math.radians(3.0)
    theta_l_rad: float = math.radians(3.0)
    theta_jaw_rad: float = math.radians(DEFAULT_THETA_MIN_DEG)
    jaw_deficit_rad: float = math.radians(1.5)
    pose_error_rad: float = 0.0
    sway_rad: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "proximal_rad", _vector(self.proximal_rad, 5, "proximal_rad"))
        if self.jaw_deficit_rad < 0 or self.pose_error_rad < 0 or self.sway_rad < 0:
            raise ValueError("deficit, pose error and sway must be >= 0")


def _dual_log(cfg_left: SimConfig, cfg_right: SimConfig, pose: PoseConfig,
              t: np.ndarray, f_env: np.ndarray, grip_right: np.ndarray,
              grip_left: np.ndarray, share_right: np.ndarray,
              rng: np.random.Generator, fg_true: Optional[np.ndarray],
              with_f_true: bool) -> DualJawLog:
    n = len(t)
    base = np.array(pose.proximal_rad)
    grip = np.maximum(grip_right, grip_left)
    grip_scale = max(float(grip.max()), 1e-12)
    bisector_offset = rng.uniform(-pose.pose_error_rad, pose.pose_error_rad)
    periods = np.array([11.0, 13.0, 7.0, 17.0, 9.0])

    theta = np.empty((n, 7))
    theta_g = np.empty(n)
    reported = np.empty(n)
    local_r = np.empty((n, 3))
    local_l = np.empty((n, 3))
    total = np.empty((n, 3))
    for k in range(n):
        prox = base + pose.sway_rad * np.sin(2 * np.pi * t[k] / periods)
        true = JawState(*prox, theta_r=pose.theta_r_rad, theta_l=pose.theta_l_rad,
                        theta_g=pose.theta_g_rad).with_jaw_angle(pose.theta_jaw_rad)
        g = gripper_frame(pose.chain, true).rotation
        g_r, g_l = gripper_poses(pose.chain, true)
        rot_r, rot_l = g @ g_r.rotation, g @ g_l.rotation
        # the grasped object pushes each jaw outward along the y-axis of G
        world_r = share_right[k] * f_env[k] + g @ np.array([0.0, grip_right[k], 0.0])
        world_l = (1.0 - share_right[k]) * f_env[k] + g @ np.array([0.0, -grip_left[k], 0.0])
        local_r[k] = rot_r.T @ world_r
        local_l[k] = rot_l.T @ world_l
        total[k] = world_r + world_l

        rep = pose.theta_jaw_rad - pose.jaw_deficit_rad * grip[k] / grip_scale
        logged = true.with_jaw_angle(rep)
        theta[k] = (*prox, logged.theta_6, logged.theta_7)
        theta_g[k] = pose.theta_g_rad + bisector_offset
        reported[k] = rep

    v_right = synthesize_voltages(cfg_right, local_r, rng)
    v_left = synthesize_voltages(cfg_left, local_l, rng)
    return DualJawLog(t_s=t, theta=theta, theta_g=theta_g, theta_jaw_reported=reported,
                      v_left=v_left, v_right=v_right,
                      f_true=total if with_f_true else None, fg_true=fg_true)


def _bump(t: np.ndarray, start: float, stop: float) -> np.ndarray:
    """Raised-cosine pulse on [start, stop], peak exactly 1 at its centre sample."""
    out = np.zeros_like(t)
    inside = (t >= start) & (t <= stop)
    out[inside] = np.sin(np.pi * (t[inside] - start) / (stop - start)) ** 2
    if np.any(inside) and out.max() > 0:
        out /= out.max()
    return out


def pinch_scenario(cfg_left: SimConfig, cfg_right: SimConfig,
                   normal_force_n: Union[float, tuple[float, float]],
                   pose: Optional[PoseConfig] = None, cycles: int = 5,
                   cycle_s: float = 2.0, rest_s: float = 0.5,
                   rng: Optional[np.random.Generator] = None) -> DualJawLog:
    """Repeated grasp-and-release of a free object between the jaws.

    ``normal_force_n`` is the peak force each jaw presses with, or a
    (right, left) pair for an asymmetric pinch. The ground-truth resultant is
    the net force on the jaws (zero for a symmetric pinch) and the
    ground-truth grasp force the smaller of the two jaw forces. Each grasp
    peaks at exactly the commanded force on its centre sample.
    """
    pose = pose or PoseConfig()
    rng = rng if rng is not None else cfg_right.rng()
    f_r, f_l = (normal_force_n, normal_force_n) if np.ndim(normal_force_n) == 0 else normal_force_n
    limit = cfg_right.geom.lateral_range_n
    if max(f_r, f_l) > limit:
        raise ValueError(f"normal force exceeds the lateral range of {limit} N")
    rest = int(round(rest_s * SAMPLE_RATE_HZ))
    m = int(round(cycle_s * SAMPLE_RATE_HZ))
    m += m % 2
    window = np.sin(np.pi * np.arange(m + 1) / m) ** 2
    window /= window.max()
    n = rest + cycles * (m + 1 + rest)
    shape = np.zeros(n)
    for c in range(cycles):
        k0 = rest + c * (m + 1 + rest)
        shape[k0:k0 + m + 1] = window
    t = np.arange(n) / SAMPLE_RATE_HZ
    grip_r, grip_l = f_r * shape, f_l * shape
    return _dual_log(cfg_left, cfg_right, pose, t, np.zeros((n, 3)), grip_r, grip_l,
                     np.full(n, 0.5), rng, np.minimum(grip_r, grip_l), with_f_true=True)


TASKS = ("flat", "stem")


def manipulation_scenario(cfg_left: SimConfig, cfg_right: SimConfig, task: str = "flat",
                          pose: Optional[PoseConfig] = None, duration_s: float = 24.0,
                          rng: Optional[np.random.Generator] = None) -> DualJawLog:
    """Teleoperated tissue manipulation with a known environment force.

    ``flat``: palpation, scraping and a light grasp-and-retract on a flat
    tissue sample. ``stem``: grasp a cylindrical stem and pull with higher
    retraction and lateral forces. The tool axis is along x of the base
    frame at the default posture.
    """
    if task not in TASKS:
        raise ValueError(f"task must be one of {TASKS}, got {task!r}")
    pose = pose or PoseConfig()
    rng = rng if rng is not None else cfg_right.rng()
    n = int(round(duration_s * SAMPLE_RATE_HZ))
    t = np.arange(n) / SAMPLE_RATE_HZ
    d = duration_s
    f = np.zeros((n, 3))
    if task == "flat":
        palp = sum(_bump(t, a * d, (a + 0.1) * d) for a in (0.02, 0.14, 0.26))
        scrape = ((t >= 0.38 * d) & (t <= 0.66 * d)) * np.sin(
            2 * np.pi * (t - 0.38 * d) / (0.14 * d))
        retract = _bump(t, 0.70 * d, 0.98 * d)
        f[:, 0] = -2.0 * palp - 0.6 * np.abs(scrape) + 1.2 * retract
        f[:, 1] = 1.2 * scrape
        f[:, 2] = 0.9 * palp + 0.5 * retract
        grip = 0.4 + 0.9 * retract
    else:
        pulls = sum(_bump(t, a * d, (a + 0.22) * d) for a in (0.04, 0.29, 0.54))
        sway = np.sin(2 * np.pi * t / (0.2 * d))
        f[:, 0] = 3.0 * pulls
        f[:, 1] = 1.4 * sway * (0.3 + 0.7 * pulls)
        f[:, 2] = 1.0 * pulls - 0.6 * _bump(t, 0.8 * d, 0.97 * d)
        grip = 0.6 + 0.8 * pulls
    share = 0.5 + 0.12 * np.sin(2 * np.pi * t / 7.0)
    return _dual_log(cfg_left, cfg_right, pose, t, f, grip, grip, share, rng,
                     None, with_f_true=True)
