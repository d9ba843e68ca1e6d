import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from acil.dynamics import (WING_ROCK_THETA, builtin_system, drift_eval, dynamics_eval,
                           make_system, regressor_eval, register_system, system_names)

finite = st.floats(-3, 3, allow_nan=False)
state2 = st.tuples(finite, finite).map(np.array)
theta5 = st.lists(finite, min_size=5, max_size=5).map(np.array)


@pytest.fixture(scope="module")
def wing():
    return builtin_system("delta_wing")


@pytest.fixture(scope="module")
def robot():
    return builtin_system("minefield_robot")


def test_wing_regressor_vanishes_at_origin(wing):
    assert np.array_equal(regressor_eval(wing, [0.0, 0.0]), np.zeros((2, 5)))


def test_wing_regressor_at_ones(wing):
    Y = regressor_eval(wing, [1.0, 1.0])
    assert np.array_equal(Y[0], np.zeros(5))
    assert np.array_equal(Y[1], np.ones(5))


def test_wing_regressor_monomials(wing):
    a, p = -0.7, 1.3
    expected = [a, p, abs(a) * p, abs(p) * p, a ** 3]
    assert np.allclose(regressor_eval(wing, [a, p])[1], expected, rtol=0, atol=1e-15)


def test_robot_has_no_drift_parameters(robot):
    assert robot.p == 0
    assert regressor_eval(robot, [3.0, -2.0]).shape == (2, 0)
    assert np.array_equal(drift_eval(robot, [3.0, -2.0], np.zeros(0)), np.zeros(2))


def test_wing_drift_reference_value(wing):
    # second row by hand: -0.018 + 0.015*0.1 - 0.062*0.1 + 0.009*0.01 + 0.021 = -0.00161
    f = drift_eval(wing, [1.0, 0.1], WING_ROCK_THETA)
    assert np.allclose(f, [0.1, -0.00161], rtol=0, atol=1e-12)


@given(state2)
def test_wing_drift_with_zero_theta_is_kinematics(x):
    f = drift_eval(builtin_system("delta_wing"), x, np.zeros(5))
    assert np.array_equal(f, [x[1], 0.0])


def test_drift_zero_at_origin(wing, robot):
    assert np.array_equal(drift_eval(wing, np.zeros(2), WING_ROCK_THETA), np.zeros(2))
    assert np.array_equal(drift_eval(robot, np.zeros(2), np.zeros(0)), np.zeros(2))


def test_robot_dynamics_is_input(robot):
    assert np.array_equal(dynamics_eval(robot, [5.0, -1.0], [1.0, 2.0], np.zeros(0)), [1.0, 2.0])


def test_wing_input_gain(wing):
    assert np.array_equal(dynamics_eval(wing, [0.0, 0.0], [1.0], WING_ROCK_THETA), [0.0, 0.75])


def test_zero_input_reduces_to_drift(wing):
    x = np.array([1.0, 0.1])
    assert np.array_equal(dynamics_eval(wing, x, [0.0], WING_ROCK_THETA),
                          drift_eval(wing, x, WING_ROCK_THETA))


def test_builtin_parameters(wing, robot):
    assert np.array_equal(wing.theta_true, [-0.018, 0.015, -0.062, 0.009, 0.021])
    assert (wing.n, wing.m, wing.p) == (2, 1, 5)
    assert np.array_equal(wing.R, [[1.0]])
    assert wing.Q(np.array([1.0, 0.0])) == 1.0
    assert (robot.n, robot.m, robot.p) == (2, 2, 0)
    assert robot.Q(np.array([1.0, 1.0])) == 2.0
    assert np.array_equal(robot.R, np.eye(2))


def test_unknown_builtin_rejected():
    with pytest.raises(ValueError, match="unknown system"):
        builtin_system("glider")


@pytest.mark.parametrize("call", [
    lambda m: regressor_eval(m, [1.0]),
    lambda m: drift_eval(m, [1.0, 2.0], np.zeros(4)),
    lambda m: dynamics_eval(m, [1.0, 2.0], [1.0, 1.0], np.zeros(5)),
    lambda m: dynamics_eval(m, [1.0, 2.0, 3.0], [1.0], np.zeros(5)),
])
def test_dimension_mismatch(wing, call):
    with pytest.raises(ValueError):
        call(wing)


@settings(max_examples=50)
@given(state2, theta5, theta5, finite, finite)
def test_drift_linear_in_theta(x, t1, t2, a, b):
    wing = builtin_system("delta_wing")
    f0 = drift_eval(wing, x, np.zeros(5))
    lhs = drift_eval(wing, x, a * t1 + b * t2) - f0
    rhs = a * (drift_eval(wing, x, t1) - f0) + b * (drift_eval(wing, x, t2) - f0)
    assert np.allclose(lhs, rhs, rtol=1e-12, atol=1e-12)
    assert np.allclose(drift_eval(wing, x, t1) - f0, regressor_eval(wing, x) @ t1,
                       rtol=0, atol=1e-15)


@settings(max_examples=50)
@given(state2, st.floats(-5, 5))
def test_dynamics_affine_in_input(x, u):
    wing = builtin_system("delta_wing")
    h = 1e-3
    up = dynamics_eval(wing, x, [u + h], WING_ROCK_THETA)
    um = dynamics_eval(wing, x, [u - h], WING_ROCK_THETA)
    assert np.allclose((up - um) / (2 * h), wing.control_matrix(x)[:, 0], atol=1e-9)


def test_regressor_continuity(wing, rng):
    for x in rng.uniform(-2, 2, size=(200, 2)):
        d = rng.normal(size=2) * 1e-7
        assert np.abs(regressor_eval(wing, x + d) - regressor_eval(wing, x)).max() < 1e-5


def test_model_validation():
    Y = lambda x: np.zeros((1, 1))
    g = lambda x: np.ones((1, 1))
    with pytest.raises(ValueError, match="positive definite"):
        make_system("s", 1, 1, 1, Y, g, [0.0], [[-1.0]])
    with pytest.raises(ValueError, match="Q\\(0\\)"):
        make_system("s", 1, 1, 1, Y, g, [0.0], [[1.0]], Q=lambda x: 1.0)
    with pytest.raises(ValueError, match="regressor"):
        make_system("s", 1, 1, 2, Y, g, [0.0, 0.0], [[1.0]])


def test_register_user_system():
    def factory():
        return make_system("drag", 1, 1, 1, lambda x: np.array([[-x[0] * abs(x[0])]]),
                           lambda x: np.ones((1, 1)), [0.3], [[2.0]])

    register_system("drag", factory)
    assert "drag" in system_names()
    m = builtin_system("drag")
    assert np.allclose(dynamics_eval(m, [2.0], [1.0], [0.3]), [-1.2 + 1.0])
