import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from jawforce.calib import SensitivityMatrix
from jawforce.core import SensorGeometry, ideal_inverse_many, ideal_sensitivity
from jawforce.kinematics import JawState, gripper_frame, gripper_poses
from jawforce.pipeline import resolve
from jawforce.sim import (SAMPLE_RATE_HZ, LoadProfile, PoseConfig, SimConfig, backlash,
                          calibration_runs, manipulation_scenario, pinch_scenario, run_profile,
                          synthesize_voltages)

GEOM = SensorGeometry()
commands = st.lists(st.floats(-5, 5, allow_nan=False), min_size=1, max_size=60)


# --- backlash -------------------------------------------------------------------

@given(commands)
def test_backlash_zero_width_is_identity(x):
    assert np.array_equal(backlash(x, 0.0), np.asarray(x))


@given(commands, st.floats(0.001, 0.5))
def test_backlash_bounded_lag(x, w):
    y = backlash(x, w)
    x = np.asarray(x)
    assert np.all(np.abs(y) >= np.abs(x) - 1e-12)
    assert np.all(np.abs(y) - np.abs(x) <= 2 * w + 1e-12)
    assert np.all((np.sign(y) == np.sign(x)) | (x == 0))


@given(st.lists(st.floats(0, 5), min_size=1, max_size=40), st.floats(0.001, 0.5))
def test_backlash_tracks_monotone_loading(x, w):
    x = np.sort(np.asarray(x))
    assert np.array_equal(backlash(x, w), x)


def test_backlash_hand_sequence():
    y = backlash([0.0, 1.0, 2.0, 1.95, 1.5, 0.5, 0.0, -1.0, -0.95], 0.05)
    # at rest after unloading the output still holds the full gap
    assert np.allclose(y, [0.0, 1.0, 2.0, 2.0, 1.6, 0.6, 0.1, -1.0, -1.0])


# --- profiles ------------------------------------------------------------------------

def test_levels_on_and_off_grid():
    up, down = LoadProfile("x", 3.0).levels()
    assert up == [0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] and down == up[-2::-1]
    up, down = LoadProfile("x", 2.2, includes_unloading=False).levels()
    assert up == [0.0, 0.5, 1.0, 1.5, 2.0, 2.2] and down == []


def test_run_profile_layout():
    samples = run_profile(SimConfig(), LoadProfile("z", 5.0, sign=-1, dwell_samples=4), t0=2.0)
    assert len(samples) == (11 + 10) * 4
    t = np.array([s.frame.t_s for s in samples])
    assert np.allclose(np.diff(t), 1.0 / SAMPLE_RATE_HZ)
    assert t[0] == 2.0
    fz = np.array([s.ref_force.fz for s in samples])
    assert fz.min() == -5.0 and fz.max() == 0.0
    assert {s.axis_label for s in samples} == {"z"}
    assert [s.phase for s in samples[:44]] == ["load"] * 44


@pytest.mark.parametrize("kwargs", [dict(axis="w", peak_n=1.0), dict(axis="x", peak_n=1.0, step_n=2.0),
                                    dict(axis="x", peak_n=1.0, dwell_samples=0),
                                    dict(axis="x", peak_n=1.0, sign=0)])
def test_profile_validation(kwargs):
    with pytest.raises(ValueError):
        LoadProfile(**kwargs)


def test_profile_beyond_range():
    with pytest.raises(ValueError, match="exceeds"):
        run_profile(SimConfig(), LoadProfile("x", 3.5))


def test_calibration_runs_cover_both_signs():
    runs = calibration_runs(SimConfig(), axes=("y",), dwell_samples=2)
    fy = np.array([s.ref_force.fy for s in runs["y"]])
    assert fy.min() == -3.0 and fy.max() == 3.0
    t = np.array([s.frame.t_s for s in runs["y"]])
    assert np.all(np.diff(t) > 0)


# --- synthesis -----------------------------------------------------------------------

@settings(max_examples=25)
@given(st.integers(0, 2**32 - 1))
def test_true_sensitivity_inverts_synthesis(seed):
    r = np.random.default_rng(seed)
    cfg = SimConfig(preload_v=r.uniform(-1, 1, 8),
                    crosstalk=np.eye(8) + 0.05 * r.standard_normal((8, 8)))
    f = r.uniform(-3, 3, (50, 3))
    v = synthesize_voltages(cfg, f, r)
    assert np.allclose(SensitivityMatrix(cfg.true_sensitivity()).apply_many(v), f, atol=1e-9)


def test_redistribution_is_invisible_to_the_ideal_map(rng):
    f = rng.uniform(-3, 3, (200, 3))
    v = synthesize_voltages(SimConfig(redistribution_v_per_n=0.5), f, rng)
    assert np.allclose(ideal_inverse_many(GEOM, v), f, atol=1e-12)
    assert np.linalg.matrix_rank(np.hstack([v, np.ones((200, 1))])) == 9


def test_null_basis_and_right_inverse():
    cfg = SimConfig()
    a = ideal_sensitivity(GEOM)
    assert np.allclose(a @ cfg.right_inverse, np.eye(3))
    assert np.allclose(a @ cfg.null_basis, 0.0, atol=1e-12)
    assert np.allclose(cfg.null_basis.T @ cfg.null_basis, np.eye(5))


def test_force_noise_matches_empirical():
    cfg = SimConfig(noise_sigma_v=np.linspace(0.002, 0.009, 8))
    v = synthesize_voltages(cfg, np.zeros((40_000, 3)), np.random.default_rng(0))
    empirical = ideal_inverse_many(GEOM, v).std(axis=0)
    assert np.allclose(empirical, cfg.force_noise_sigma(), rtol=0.03)


def test_same_seed_same_voltages():
    cfg = SimConfig(noise_sigma_v=0.01, seed=42)
    f = np.ones((10, 3))
    assert np.array_equal(synthesize_voltages(cfg, f, cfg.rng()),
                          synthesize_voltages(cfg, f, cfg.rng()))


@pytest.mark.parametrize("kwargs, match", [
    (dict(noise_sigma_v=-1.0), "noise"),
    (dict(backlash_width_n=(0.1, 0.1)), "backlash"),
    (dict(crosstalk=np.zeros((8, 8))), "condition"),
    (dict(crosstalk=np.eye(7)), "8x8"),
    (dict(preload_v=(math.nan,) * 8), "finite"),
    (dict(redistribution_v_per_n=-0.1), "redistribution"),
])
def test_sim_config_validation(kwargs, match):
    with pytest.raises(ValueError, match=match):
        SimConfig(**kwargs)


# --- scenarios ------------------------------------------------------------------------

def _ideal(cfg):
    return SensitivityMatrix(cfg.true_sensitivity(), cfg.geom)


def test_pinch_peaks_and_truth():
    left, right = SimConfig(seed=1), SimConfig(seed=2)
    log = pinch_scenario(left, right, 1.2, cycles=3)
    peaks = np.sort(log.fg_true)[-3:]
    assert np.allclose(peaks, 1.2, rtol=0, atol=0)
    assert np.allclose(log.f_true, 0.0, atol=1e-12)
    assert np.all(np.diff(log.t_s) > 0)


def test_asymmetric_pinch_net_force():
    left, right = SimConfig(), SimConfig()
    pose = PoseConfig()
    log = pinch_scenario(left, right, (1.0, 0.6), pose, cycles=1)
    res = resolve(log, _ideal(left), _ideal(right), pose.chain)
    assert np.allclose(res.grasp, log.fg_true, atol=1e-9)
    assert np.allclose(res.resultant, log.f_true, atol=1e-9)
    assert np.linalg.norm(log.f_true, axis=1).max() == pytest.approx(0.4, abs=1e-9)


def test_pinch_force_limit():
    with pytest.raises(ValueError, match="lateral range"):
        pinch_scenario(SimConfig(), SimConfig(), 3.5)


def test_reported_jaw_angle_deficit_is_clamped_back():
    pose = PoseConfig()
    log = pinch_scenario(SimConfig(), SimConfig(), 1.0, pose, cycles=1)
    assert log.theta_jaw_reported.min() == pytest.approx(pose.theta_jaw_rad - pose.jaw_deficit_rad)
    assert log.theta_jaw_reported.max() == pytest.approx(pose.theta_jaw_rad)


@pytest.mark.parametrize("task", ["flat", "stem"])
def test_manipulation_jaw_loads_in_range(task):
    left, right = SimConfig(), SimConfig()
    pose = PoseConfig()
    log = manipulation_scenario(left, right, task, pose, duration_s=6.0)
    f_l = _ideal(left).apply_many(log.v_left)
    f_r = _ideal(right).apply_many(log.v_right)
    for f in (f_l, f_r):
        assert np.all(np.abs(f[:, :2]) <= GEOM.lateral_range_n)
        assert np.all(np.abs(f[:, 2]) <= GEOM.axial_range_n)
    res = resolve(log, _ideal(left), _ideal(right), pose.chain)
    assert np.allclose(res.resultant, log.f_true, atol=1e-9)
    assert log.fg_true is None


def test_manipulation_bad_task():
    with pytest.raises(ValueError, match="task"):
        manipulation_scenario(SimConfig(), SimConfig(), "suture")


def test_tool_axis_along_base_x():
    pose = PoseConfig(proximal_rad=(0, 0, 0, 0, 0), theta_g_rad=0.0)
    s = JawState(theta_r=pose.theta_r_rad, theta_l=pose.theta_l_rad)
    assert np.allclose(gripper_frame(pose.chain, s).rotation[:, 0], [1, 0, 0])
    g_r, g_l = gripper_poses(pose.chain, s.with_jaw_angle(0.0))
    assert np.allclose(g_r.rotation[:, 2], [1, 0, 0]) and np.allclose(g_l.rotation[:, 2], [1, 0, 0])
