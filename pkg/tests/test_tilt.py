import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bicx.errors import PreconditionError, TiltInfeasible
from bicx.tilt import (
    TiltFunction,
    build_tilt,
    default_sample_count,
    eval_tilt,
    tilt_lower_bound,
)


def test_symmetric_pair_is_feasible():
    t = build_tilt([[1.0], [-1.0]], None, 0.2, 1.0, spot_check=False)
    assert abs(t.moment()[0]) <= 1e-12
    assert t.f_values[0] == pytest.approx(t.f_values[1])


def test_two_point_weighted():
    t = build_tilt([[1.0], [-1.0]], [0.75, 0.25], 0.4, 1.0, lower_bound=0.1, spot_check=False)
    assert abs(0.75 * t.f_values[0] - 0.25 * t.f_values[1]) <= 1e-12
    assert t.f_values[1] == pytest.approx(3 * t.f_values[0], abs=1e-12)
    assert 0.1 <= t.f_values[0] <= 1 / 3 + 1e-12


def test_half_space_is_infeasible():
    rng = np.random.default_rng(0)
    z = np.column_stack([rng.uniform(0.5, 2.0, 50), rng.uniform(-1.0, 1.0, 50)])
    with pytest.raises(TiltInfeasible) as exc:
        build_tilt(z, None, 0.2, 1.0, spot_check=False)
    assert exc.value.direction[0] > 0.99


def test_parameter_guards():
    with pytest.raises(PreconditionError):
        build_tilt([[1.0], [-1.0]], None, 0.0, 1.0)
    with pytest.raises(PreconditionError):
        build_tilt([[1.0], [-1.0]], [1.0], 0.1, 1.0)
    with pytest.raises(PreconditionError):
        build_tilt([[1.0], [-1.0]], None, 0.1, 1.0, lower_bound=1.5)


def test_spot_check_warns():
    with pytest.warns(RuntimeWarning):
        build_tilt([[1.0], [-0.01]], [0.01, 0.99], 0.5, 1.0, lower_bound=0.001)


def test_default_constants():
    assert tilt_lower_bound(0.2, 2.0) == pytest.approx(0.025)
    assert tilt_lower_bound(0.2, 0.5) == pytest.approx(0.05)
    assert default_sample_count(0.5) == 2000
    assert default_sample_count(0.01) == 20000
    assert default_sample_count(0.05) == 4000
    assert default_sample_count(0.0) == 20000


def test_eval_tilt_rules():
    t = TiltFunction(np.array([[0.0], [1.0]]), np.array([0.2, 0.9]), 0.1, np.array([0.5, 0.5]))
    assert eval_tilt(t, [1.0]) == 0.9
    assert eval_tilt(t, [0.4]) == 0.2
    np.testing.assert_array_equal(eval_tilt(t, [[0.0], [0.7]]), [0.2, 0.9])
    c = TiltFunction(np.array([[0.0], [1.0]]), np.array([0.3, 0.3]), 0.1, np.array([0.5, 0.5]))
    assert eval_tilt(c, [17.0]) == 0.3


def test_tilt_roundtrip():
    t = build_tilt([[1.0, 0.0], [-1.0, 0.5], [0.0, -1.0]], None, 0.2, 1.0, spot_check=False)
    r = TiltFunction.from_dict(t.to_dict())
    np.testing.assert_array_equal(r.f_values, t.f_values)
    np.testing.assert_array_equal(r.z_points, t.z_points)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.05, 0.5))
def test_random_centred_instances(seed, k, eps):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((200, k))
    z -= z.mean(axis=0)
    t = build_tilt(z, None, eps, 1.0, spot_check=False)
    assert np.linalg.norm(t.moment()) <= 1e-8
    assert t.f_values.min() >= eps / 4 and t.f_values.max() <= 1.0
