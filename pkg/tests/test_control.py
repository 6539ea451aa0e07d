from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rollfly.control import (
    FlightGains,
    PairForces,
    RateControllerState,
    allocate,
    allocation_matrix,
    flight_velocity_controller,
    pair_to_speeds,
    pi_rate_control,
    rotor_speeds,
    wrench_from_speeds,
)
from rollfly.core import ModelError, preset
from rollfly.dynamics import RigidBodyState, Wrench

C = 0.14 / math.sqrt(2)


def test_pair_offset(roll):
    assert roll[0].pair_offset == pytest.approx(0.0989949, abs=1e-7)


def test_matrix_row_sums(roll):
    np.testing.assert_allclose(allocation_matrix(roll[0]) @ np.ones(4), [4, 0, 0, 0], atol=1e-15)


@given(st.floats(0.01, 1.0), st.floats(1e-4, 0.1))
def test_matrix_full_rank(arm, k_torque):
    params = preset("titan_table1_roll")[0].with_(arm_length=arm, k_torque=k_torque)
    assert abs(np.linalg.det(allocation_matrix(params))) > 0


def test_allocate_zero(roll):
    assert np.array_equal(allocate(Wrench.zero(), roll[0]).forces, np.zeros(4))


def test_allocate_pure_pitch_torque(roll):
    pair = allocate(Wrench(0.0, np.array([0.0, 1.0, 0.0])), roll[0])
    q = 1 / (4 * C)
    np.testing.assert_allclose(pair.forces, [-q, -q, q, q], rtol=1e-12)
    assert q == pytest.approx(2.5254, abs=1e-4)
    assert not pair.saturated


def test_allocate_pure_roll_torque(roll):
    pair = allocate(Wrench(0.0, np.array([1.0, 0.0, 0.0])), roll[0])
    q = 1 / (4 * C)
    np.testing.assert_allclose(pair.forces, [-q, q, q, -q], rtol=1e-12)


def test_allocate_matches_numeric_solve(roll):
    params = roll[0]
    target = np.array([0.5, 0.1, -0.2, 0.003])
    pair = allocate(Wrench(target[0], target[1:]), params)
    np.testing.assert_allclose(pair.forces, np.linalg.solve(allocation_matrix(params), target), rtol=1e-12)


def test_allocate_saturation_keeps_direction(roll):
    params = roll[0]
    pair = allocate(Wrench(0.0, np.array([0.0, 10.0, 0.0])), params)
    assert pair.saturated
    assert np.max(np.abs(pair.forces)) == pytest.approx(params.max_rotor_thrust)
    np.testing.assert_allclose(pair.forces / pair.forces[3], [-1, -1, 1, 1], rtol=1e-12)


def test_single_cobot_clips_reverse_thrust(fly):
    params = fly[0]
    pair = allocate(Wrench(0.0, np.array([0.0, 1.0, 0.0])), params)
    assert pair.saturated
    assert np.all(pair.forces >= 0)


@pytest.mark.parametrize(
    "forces, n1, n5",
    [([0.0, 0, 0, 0], 0.0, 0.0), ([1.0, 0, 0, 0], 1.0, 0.0), ([-4.0, 0, 0, 0], 0.0, 2.0)],
)
def test_pair_to_speeds_branches(forces, n1, n5):
    s = pair_to_speeds(PairForces(np.array(forces)), 1.0).speeds
    assert (s[0], s[4]) == (n1, n5)


def test_pair_to_speeds_scales_with_thrust_constant(roll):
    k = roll[0].k_thrust
    s = pair_to_speeds(PairForces(np.array([k, 0, 0, -4 * k])), k).speeds
    np.testing.assert_allclose(s, [1, 0, 0, 0, 0, 0, 0, 2], rtol=1e-12)


def test_allocation_round_trip_random(roll):
    params = roll[0]
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(2000):
        w = Wrench(0.0, rng.uniform(-1.0, 1.0, 3) * np.array([1.0, 1.0, 0.01]))
        speeds, saturated = rotor_speeds(w, params)
        assert not saturated
        back = wrench_from_speeds(speeds, params)
        worst = max(worst, np.max(np.abs(back.torque - w.torque)), abs(back.thrust))
    assert worst < 1e-9


def test_single_cobot_round_trip(fly):
    params, env, _ = fly
    w = Wrench(params.mass * env.gravity, np.array([0.001, -0.002, 0.0005]))
    speeds, saturated = rotor_speeds(w, params)
    assert not saturated
    back = wrench_from_speeds(speeds, params)
    assert back.thrust == pytest.approx(w.thrust, rel=1e-12)
    np.testing.assert_allclose(back.torque, w.torque, atol=1e-12)


def test_pi_zero_error():
    wrench, _ = pi_rate_control(np.zeros(3), np.zeros(3), RateControllerState(), 0.01)
    assert np.array_equal(wrench.torque, np.zeros(3)) and wrench.thrust == 0.0


def test_pi_proportional_only():
    ctl = RateControllerState(kp=0.1, ki=0.0)
    wrench, _ = pi_rate_control(np.array([0.0, 1.0, 0.0]), np.zeros(3), ctl, 0.01)
    np.testing.assert_allclose(wrench.torque, [0.0, 0.1, 0.0])


def test_pi_integral_grows_linearly_then_clamps():
    ctl = RateControllerState(kp=0.0, ki=2.0, integral_limit=0.5, prev_error=np.array([0.0, 1.0, 0.0]))
    e = np.array([0.0, 1.0, 0.0])
    torques = []
    for _ in range(100):
        w, ctl = pi_rate_control(e, np.zeros(3), ctl, 0.01)
        torques.append(w.torque[1])
    np.testing.assert_allclose(torques[:10], 2.0 * 0.01 * np.arange(1, 11), rtol=1e-12)
    assert torques[-1] == pytest.approx(2.0 * 0.5)
    assert np.all(np.diff(torques) >= -1e-15)


def test_pi_rejects_bad_inputs():
    with pytest.raises(ValueError):
        pi_rate_control(np.zeros(3), np.zeros(3), RateControllerState(), 0.0)
    with pytest.raises(ValueError):
        RateControllerState(kp=-1.0)


def test_controller_holds_hover(fly):
    params, env, _ = fly
    state = RigidBodyState.at_rest(position=(0.0, 0.0, 1.0))
    w = flight_velocity_controller(0.0, state, params, env, altitude_ref=1.0)
    assert w.thrust == pytest.approx(params.mass * env.gravity, rel=1e-12)
    np.testing.assert_allclose(w.torque, np.zeros(3), atol=1e-15)


def test_controller_without_drag_needs_no_tilt(fly):
    params, env, _ = fly
    env = env.with_(drag_coefficient=0.0)
    state = RigidBodyState(np.array([0.0, 0, 1.0]), np.array([1.0, 0, 0]), np.eye(3), np.zeros(3))
    w = flight_velocity_controller(1.0, state, params, env, altitude_ref=1.0)
    np.testing.assert_allclose(w.torque, np.zeros(3), atol=1e-15)


def test_controller_pitches_forward_against_drag(fly):
    params, env, _ = fly
    state = RigidBodyState(np.array([0.0, 0, 1.0]), np.array([1.0, 0, 0]), np.eye(3), np.zeros(3))
    w = flight_velocity_controller(1.0, state, params, env, altitude_ref=1.0)
    assert w.torque[1] > 0


def test_controller_rejects_excess_tilt(fly):
    params, env, _ = fly
    state = RigidBodyState(np.array([0.0, 0, 1.0]), np.array([5.0, 0, 0]), np.eye(3), np.zeros(3))
    with pytest.raises(ModelError, match="exceeds"):
        flight_velocity_controller(5.0, state, params, env, altitude_ref=1.0, gains=FlightGains())
