import math

import numpy as np
import pytest

from jawforce.config import ENV_VAR, ConfigError, load_config
from jawforce.kinematics import format_chain, identity_chain


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_defaults_without_file(monkeypatch):
    monkeypatch.delenv(ENV_VAR, raising=False)
    cfg = load_config(None)
    assert cfg.geometry().c_n_per_v == 3.063
    assert cfg.theta_min_deg() == 8.4
    assert cfg.sim().noise_sigma_v == (0.0,) * 8
    assert math.isclose(math.degrees(cfg.mounts().theta_r), 3.0)


def test_env_var_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_VAR, write(tmp_path, "[geometry]\nc_n_per_v = 2.5\n"))
    assert load_config(None).geometry().c_n_per_v == 2.5


def test_sensor_overrides(tmp_path):
    cfg = load_config(write(tmp_path, """
[sim]
noise_sigma_v = 0.01
preload_v = 0.1 0.2 0.3 0.4 0.5 0.6 0.7 0.8
seed = 4
[sim.left]
noise_sigma_v = 0.02
crosstalk = identity
[sim.right]
backlash_width_n = 0.01, 0.02, 0.03
"""))
    left, right = cfg.sim("left"), cfg.sim("right")
    assert left.noise_sigma_v == (0.02,) * 8 and right.noise_sigma_v == (0.01,) * 8
    assert right.backlash_width_n == (0.01, 0.02, 0.03)
    assert left.preload_v == right.preload_v and left.seed == 4
    assert np.array_equal(left.crosstalk, np.eye(8))


def test_crosstalk_matrix(tmp_path):
    values = " ".join(str(x) for x in (np.eye(8) * 1.1).ravel())
    cfg = load_config(write(tmp_path, f"[sim]\ncrosstalk = {values}\n"))
    assert np.allclose(cfg.sim().crosstalk, 1.1 * np.eye(8))


@pytest.mark.parametrize("text, key", [
    ("[sims]\nseed = 1\n", "sims"),
    ("[sim]\nsead = 1\n", "sim.sead"),
    ("[sim]\nnoise_sigma_v = lots\n", "sim.noise_sigma_v"),
    ("[sim]\npreload_v = 1 2 3\n", "sim.preload_v"),
    ("[sim]\ncrosstalk = 1 2\n", "sim.crosstalk"),
    ("[geometry]\nh_mm = -1\n", "geometry"),
    ("[profile]\nincludes_unloading = maybe\n", "profile.includes_unloading"),
    ("[profile]\ndwell_samples = 2.5\n", "profile.dwell_samples"),
    ("[geometry]\nh_mm = 1 2\n", "geometry.h_mm"),
])
def test_errors_name_the_key(tmp_path, text, key):
    with pytest.raises(ConfigError) as info:
        cfg = load_config(write(tmp_path, text))
        cfg.geometry(), cfg.sim(), cfg.boolean("profile", "includes_unloading", True)
        cfg.integer("profile", "dwell_samples", 1)
    assert info.value.key == key


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(str(tmp_path / "nope.ini"))


def test_chain_path_relative_to_config(tmp_path):
    (tmp_path / "chain.txt").write_text(format_chain(identity_chain()))
    cfg = load_config(write(tmp_path, "[kinematics]\nchain = chain.txt\ntheta_min_deg = 5\n"))
    assert cfg.chain().names == ("jaw6", "jaw7")
    assert cfg.theta_min_deg() == 5.0


def test_pose_in_degrees(tmp_path):
    cfg = load_config(write(tmp_path, """
[scenario]
proximal_deg = 10 0 0 0 -10
pose_error_deg = 2
[kinematics]
theta_l_deg = 4
"""))
    pose = cfg.pose(identity_chain())
    assert np.allclose(pose.proximal_rad, np.radians([10, 0, 0, 0, -10]))
    assert math.isclose(pose.pose_error_rad, math.radians(2))
    assert math.isclose(pose.theta_l_rad, math.radians(4))


def test_shipped_example_config_loads():
    from pathlib import Path
    cfg = load_config(str(Path(__file__).parents[1] / "docs" / "example.ini"))
    assert cfg.sim("right").preload_v == (0.25,) * 8
    assert cfg.sim("left").seed == 1
    assert cfg.pose(cfg.chain()).sway_rad == pytest.approx(math.radians(1))
