"""Per-row resolution of dual-jaw logs: apply both sensitivity matrices,
correct the jaw angle, and rotate the jaw forces into the base frame or
project them on the grasp axis."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .calib import SensitivityMatrix, max_error, nrmsd, rmse
from .core import SensorGeometry
from .io import DualJawLog
from .kinematics import (DEFAULT_THETA_MIN_DEG, JawState, TransformChain, gripper_frame,
                         gripper_poses)


@dataclass(frozen=True)
class MountAngles:
    theta_r: float = math.radians(3.0)
    theta_l: float = math.radians(3.0)


@dataclass(frozen=True, eq=False)
class ResolvedLog:
    t_s: np.ndarray
    f_left: np.ndarray        # sensor frame L
    f_right: np.ndarray       # sensor frame R
    resultant: np.ndarray     # base frame
    grasp: np.ndarray


def jaw_states(log: DualJawLog, mounts: MountAngles, theta_min: float) -> list[JawState]:
    """Logged postures with the jaw opening corrected and split equally."""
    states = []
    for k in range(len(log)):
        th = log.theta[k]
        s = JawState(*th[:7], theta_r=mounts.theta_r, theta_l=mounts.theta_l,
                     theta_g=float(log.theta_g[k]), theta_min=theta_min)
        states.append(s.corrected(float(log.theta_jaw_reported[k])))
    return states


def resolve(log: DualJawLog, left: SensitivityMatrix, right: SensitivityMatrix,
            chain: TransformChain, mounts: MountAngles = MountAngles(),
            theta_min: float = math.radians(DEFAULT_THETA_MIN_DEG)) -> ResolvedLog:
    chain.split()
    f_l = left.apply_many(log.v_left)
    f_r = right.apply_many(log.v_right)
    n = len(log)
    resultant = np.empty((n, 3))
    grasp = np.empty(n)
    for k, state in enumerate(jaw_states(log, mounts, theta_min)):
        g = gripper_frame(chain, state).rotation
        g_r, g_l = gripper_poses(chain, state)
        in_g_r = g_r.rotation @ f_r[k]
        in_g_l = g_l.rotation @ f_l[k]
        resultant[k] = g @ (in_g_r + in_g_l)
        grasp[k] = min(abs(in_g_r[1]), abs(in_g_l[1]))
    return ResolvedLog(log.t_s, f_l, f_r, resultant, grasp)


@dataclass(frozen=True)
class AxisMetrics:
    rmse_n: tuple[float, ...]
    nrmsd_pct: tuple[float, ...]
    max_error_n: tuple[float, ...]


def force_metrics(pred: np.ndarray, truth: np.ndarray,
                  geom: Optional[SensorGeometry] = None) -> AxisMetrics:
    """RMSE, NRMSD and max error per axis."""
    e = rmse(pred, truth)
    return AxisMetrics(tuple(map(float, e)), tuple(map(float, nrmsd(e, geom))),
                       tuple(map(float, max_error(pred, truth))))


def grip_metrics(pred: np.ndarray, truth: np.ndarray,
                 geom: Optional[SensorGeometry] = None) -> AxisMetrics:
    geom = geom or SensorGeometry()
    p = np.asarray(pred, dtype=float)
    t = np.asarray(truth, dtype=float)
    if p.shape != t.shape or p.size == 0:
        raise ValueError("grip prediction and truth must be non-empty and equal length")
    e = float(np.sqrt(np.mean((p - t) ** 2)))
    return AxisMetrics((e,), (100.0 * e / (2.0 * geom.lateral_range_n),),
                       (float(np.max(np.abs(p - t))),))
