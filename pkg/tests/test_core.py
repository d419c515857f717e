import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from jawforce.core import (ChannelFrame, ForceVector, SensorGeometry, ideal_inverse,
                           ideal_inverse_many, ideal_sensitivity, moment_residual)

GEOM = SensorGeometry()
volts = arrays(np.float64, 8, elements=st.floats(-5, 5, allow_nan=False))


def equilibrium_oracle(geom, v):
    """Solve the axial sum and both moment balances as a 3x3 linear system."""
    c, h, d = geom.c_n_per_v, geom.h_mm, geom.d_mm
    lhs = np.array([[0.0, 0.0, 1.0],
                    [0.0, h, 0.0],
                    [h, 0.0, -d]])
    rhs = np.array([c * (v[0] + v[1] + v[2] + v[3] - v[4] - v[5] - v[6] - v[7]),
                    0.5 * geom.l_mm * c * (v[1] + v[5] - v[3] - v[7]),
                    0.5 * geom.w_mm * c * (v[0] + v[6] - v[2] - v[4])])
    return np.linalg.solve(lhs, rhs)


def test_unit_voltage_on_channel_two():
    # hand evaluation: Fz = c, Fy = L c / 2H, Fx = D c / H
    f = ideal_inverse(GEOM, ChannelFrame(0.0, (0, 1, 0, 0, 0, 0, 0, 0)))
    assert f.fz == pytest.approx(3.063, abs=1e-12)
    assert f.fy == pytest.approx(3.45 * 3.063 / (2 * 15.85), abs=1e-12)
    assert f.fx == pytest.approx(5.50 * 3.063 / 15.85, abs=1e-12)
    assert (round(f.fx, 6), round(f.fy, 6)) == (1.062871, 0.333355)


@given(volts)
def test_matrix_matches_equilibrium_solve(v):
    got = ideal_sensitivity(GEOM) @ v
    assert np.allclose(got, equilibrium_oracle(GEOM, v), rtol=1e-12, atol=1e-12)


@given(volts)
def test_moment_residual_vanishes_at_ideal_inverse(v):
    frame = ChannelFrame(0.0, tuple(v))
    m = moment_residual(GEOM, frame, ideal_inverse(GEOM, frame))
    assert abs(m.mx) < 1e-9 and abs(m.my) < 1e-9


def test_moment_residual_detects_wrong_force():
    frame = ChannelFrame(0.0, (0.1,) * 8)
    f = ideal_inverse(GEOM, frame)
    m = moment_residual(GEOM, frame, ForceVector(f.fx, f.fy + 1.0, f.fz))
    assert m.mx == pytest.approx(GEOM.h_mm)
    assert m.my == pytest.approx(0.0, abs=1e-12)


def test_sensitivity_is_read_only_and_rank_three():
    a = ideal_sensitivity(GEOM)
    assert a.shape == (3, 8)
    assert np.linalg.matrix_rank(a) == 3
    with pytest.raises(ValueError):
        a[0, 0] = 1.0


@given(arrays(np.float64, (5, 8), elements=st.floats(-5, 5, allow_nan=False)))
def test_batch_equals_per_frame(v):
    batch = ideal_inverse_many(GEOM, v)
    for row, f in zip(v, batch):
        single = ideal_inverse(GEOM, ChannelFrame(0.0, tuple(row))).as_array()
        assert np.allclose(single, f, rtol=1e-14, atol=1e-13)


@given(st.floats(0.1, 10))
def test_lateral_rows_invariant_under_length_scaling(k):
    a = ideal_sensitivity(GEOM)
    b = ideal_sensitivity(GEOM.scaled(k))
    assert np.allclose(a, b, rtol=1e-12, atol=1e-12)


@pytest.mark.parametrize("field", ["h_mm", "c_n_per_v", "axial_range_n"])
@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_geometry_rejects_nonpositive(field, bad):
    with pytest.raises(ValueError, match=field):
        SensorGeometry(**{field: bad})


def test_frame_validation():
    with pytest.raises(ValueError, match="8 channels"):
        ChannelFrame(0.0, (0.0,) * 7)
    with pytest.raises(ValueError, match="finite"):
        ChannelFrame(0.0, (0.0,) * 7 + (math.nan,))
    with pytest.raises(ValueError, match="finite"):
        ForceVector(0.0, math.inf, 0.0)


def test_ranges():
    assert GEOM.ranges_n == (3.0, 3.0, 5.0)
