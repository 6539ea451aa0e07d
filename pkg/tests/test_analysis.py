from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rollfly.analysis import (
    InfeasibleError,
    advantage_map,
    coverage_area,
    crossover_points,
    flying_steady_state,
    optimal_velocity,
    range_array,
    range_curve,
    rolling_steady_state,
    speed_grid,
)
from rollfly.core import preset
from rollfly.dynamics import mean_rolling_area
from rollfly.power import glauert_residual

DEG = math.pi / 180


def test_rolling_torque_at_crawl(roll):
    params, env, eff = roll
    r = rolling_steady_state(1e-6, 0.0, 0.01, params, env, eff)
    assert r.torque == pytest.approx(0.0043264, rel=1e-6)
    assert r.feasible


def test_rolling_torque_includes_drag_and_grade(roll):
    params, env, eff = roll
    v, slope = 0.3, 1.0 * DEG
    weight = params.mass * env.gravity
    drag = 0.5 * env.drag_coefficient * env.air_density * mean_rolling_area(params) * v * v
    expected = (weight * math.sin(slope) + drag + 0.05 * weight * math.cos(slope)) * params.shell_radius
    r = rolling_steady_state(v, slope, 0.05, params, env, eff)
    assert r.torque == pytest.approx(expected, rel=1e-12)


def test_flying_balance(fly):
    params, env, eff = fly
    r = flying_steady_state(1.0, 0.0, params, env, eff)
    A = (params.rotor_height * math.cos(r.pitch) + 2 * params.shell_radius * math.sin(r.pitch)) * params.shell_width
    drag = 0.5 * env.drag_coefficient * env.air_density * A
    assert math.tan(r.pitch) == pytest.approx(drag / (params.mass * env.gravity), rel=1e-9)
    assert r.thrust == pytest.approx(math.hypot(drag, params.mass * env.gravity), rel=1e-9)
    per = r.rotor_thrusts[0]
    from rollfly.power import induced_velocity

    nu = induced_velocity(per, 1.0, -r.pitch, env.air_density, params.disk_radius)
    assert abs(glauert_residual(nu, per, 1.0, -r.pitch, env.air_density, params.disk_radius)) < 1e-9


def test_flying_infeasible_beyond_tilt_limit(fly):
    params, env, eff = fly
    r = flying_steady_state(1.7, 0.0, params, env, eff)
    assert not r.feasible and "60 deg" in r.reason
    assert np.isnan(range_array("flying", [1.7], 0.0, 0.0, params, env, eff)[0])


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 1.0), st.floats(-0.5, 2.0), st.floats(0.01, 0.2))
def test_range_is_speed_times_energy_over_power(v, slope_deg, crr):
    roll, env, eff = preset("titan_table1_roll")
    r = rolling_steady_state(v, slope_deg * DEG, crr, roll, env, eff)
    assert r.range == pytest.approx(v * roll.battery_energy / r.power, rel=1e-15)


def test_rolling_infeasible_with_weak_rotors(roll):
    params, env, eff = roll
    r = rolling_steady_state(0.1, 60 * DEG, 0.9, params.with_(max_rotor_thrust=1.0), env, eff)
    assert not r.feasible and "exceeds" in r.reason


def test_crawl_range_below_optimum(roll):
    params, env, eff = roll
    v_star, R_star = optimal_velocity("rolling", 0.0, 0.01, params, env, eff)
    assert range_array("rolling", [0.001], 0.0, 0.01, params, env, eff)[0] < R_star
    assert 0.0 < v_star < 1.0


@pytest.mark.parametrize("mode", ["rolling", "flying"])
def test_range_curve_shape(mode, roll, fly):
    params = roll[0] if mode == "rolling" else fly[0]
    _, env, eff = roll
    curve = range_curve(mode, 0.0, 0.01, speed_grid(), params, env, eff)
    R = np.where(np.isnan(curve.ranges), -np.inf, curve.ranges)
    assert curve.optimum_range >= R.max()
    i = int(np.argmax(R))
    assert R[i - 1] - 2 * R[i] + R[i + 1] <= 0 or not np.isfinite(R[i + 1])
    tail = curve.ranges[(curve.speeds > 2 * curve.optimum_speed) & curve.feasible]
    assert np.all(np.diff(tail) < 0)


def test_range_curve_rejects_bad_grid(roll):
    params, env, eff = roll
    with pytest.raises(ValueError):
        range_curve("rolling", 0.0, 0.01, [], params, env, eff)
    with pytest.raises(ValueError, match="mode"):
        range_curve("hopping", 0.0, 0.01, [1.0], params, env, eff)


@pytest.mark.parametrize(
    "mode, slope_deg, crr, lo, hi",
    [
        ("rolling", 0.0, 0.01, 0.01, 1.0),
        ("rolling", 1.5, 0.12, 0.01, 1.0),
        ("flying", 1.0, 0.0, 0.1, 1.6),
    ],
)
def test_golden_matches_exhaustive_scan(mode, slope_deg, crr, lo, hi, roll, fly):
    params = roll[0] if mode == "rolling" else fly[0]
    _, env, eff = roll
    v_star, R_star = optimal_velocity(mode, slope_deg * DEG, crr, params, env, eff)
    grid = np.linspace(lo, hi, 100_000)
    R = range_array(mode, grid, slope_deg * DEG, crr, params, env, eff)
    j = int(np.nanargmax(R))
    assert abs(v_star - grid[j]) < 1e-3
    assert R_star >= R[j] * (1 - 1e-7)


def test_flying_infeasible_everywhere_raises(fly):
    params, env, eff = fly
    with pytest.raises(InfeasibleError, match="no feasible speed"):
        optimal_velocity("flying", 0.0, 0.0, params, env.with_(drag_coefficient=500.0), eff, grid=[5.0, 10.0])


@pytest.fixture(scope="module")
def small_map():
    roll, env, eff = preset("titan_table1_roll")
    fly = preset("titan_table1_fly")[0]
    slopes = np.radians(np.linspace(-0.5, 2.0, 4))
    crrs = np.linspace(0.01, 0.2, 4)
    return advantage_map(slopes, crrs, roll, fly, env, eff), (roll, fly, env, eff)


def test_advantage_monotone(small_map):
    grid, _ = small_map
    assert np.all(np.diff(grid.delta, axis=0) <= 0)
    assert np.all(np.diff(grid.delta, axis=1) <= 0)


def test_advantage_sign_agrees_with_independent_optima(small_map):
    grid, (roll, fly, env, eff) = small_map
    for i, s in enumerate(grid.slopes):
        R_fly = range_curve("flying", s, 0.0, speed_grid(), fly, env, eff).optimum_range
        for j, c in enumerate(grid.crrs):
            if grid.delta[i, j] > 0:
                R_roll = range_curve("rolling", s, c, speed_grid(), roll, env, eff).optimum_range
                assert R_roll > R_fly


def test_crossover_interpolation():
    slopes = np.array([0.0, 1.0])
    crrs = np.array([0.0, 1.0, 2.0])
    delta = np.array([[3.0, 1.0, -1.0], [1.0, 2.0, 3.0]])
    assert crossover_points(slopes, crrs, delta) == [(0.0, 1.5)]


def test_single_cell_map(roll, fly):
    _, env, eff = roll
    grid = advantage_map([0.0], [0.01], roll[0], fly[0], env, eff)
    assert grid.delta.shape == (1, 1)
    assert grid.crossover == []


@pytest.mark.parametrize("km, area", [(130, 13273), (260, 53093), (0, 0)])
def test_coverage(km, area):
    assert round(coverage_area(km * 1e3) / 1e6) == area


def test_coverage_rejects_negative():
    with pytest.raises(ValueError):
        coverage_area(-1.0)
