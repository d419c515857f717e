import math

import numpy as np
import pytest

from jawforce.calib import SensitivityMatrix
from jawforce.pipeline import MountAngles, force_metrics, grip_metrics, jaw_states, resolve
from jawforce.sim import PoseConfig, SimConfig, pinch_scenario


def test_force_metrics_hand_values():
    pred = np.array([[0.1, 0.0, 0.0], [-0.1, 0.6, 0.0]])
    m = force_metrics(pred, np.zeros((2, 3)))
    assert m.rmse_n == pytest.approx((0.1, math.sqrt(0.18), 0.0))
    assert m.nrmsd_pct == pytest.approx((100 * 0.1 / 6, 100 * math.sqrt(0.18) / 6, 0.0))
    assert m.max_error_n == pytest.approx((0.1, 0.6, 0.0))


def test_grip_metrics():
    m = grip_metrics([1.0, 2.0], [1.0, 1.6])
    assert m.rmse_n[0] == pytest.approx(math.sqrt(0.08))
    assert m.nrmsd_pct[0] == pytest.approx(100 * math.sqrt(0.08) / 6)
    with pytest.raises(ValueError):
        grip_metrics([1.0], [1.0, 2.0])


def test_clamp_matters_under_jaw_deficit():
    cfg = SimConfig()
    pose = PoseConfig(jaw_deficit_rad=math.radians(4))
    log = pinch_scenario(cfg, cfg, 1.4, pose, cycles=1)
    s = SensitivityMatrix(cfg.true_sensitivity())
    exact = resolve(log, s, s, pose.chain)
    raw = resolve(log, s, s, pose.chain, theta_min=0.0)
    assert np.max(np.abs(exact.resultant)) < 1e-9
    assert np.max(np.abs(raw.resultant)) > 1e-2


def test_jaw_states_use_mount_angles():
    cfg = SimConfig()
    log = pinch_scenario(cfg, cfg, 1.0, cycles=1)
    states = jaw_states(log, MountAngles(0.01, 0.02), theta_min=0.0)
    for s, rep in zip(states[::50], log.theta_jaw_reported[::50]):
        assert s.jaw_angle == pytest.approx(rep, abs=1e-15)
        assert (s.theta_r, s.theta_l) == (0.01, 0.02)
