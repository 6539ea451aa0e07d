from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from rollfly.core import EfficiencyChain
from rollfly.power import (
    RotorOperatingPoint,
    glauert_residual,
    hover_induced_velocity,
    induced_velocity,
    operating_point,
    rotor_power,
    vehicle_power_flying,
    vehicle_power_rolling_phase_averaged,
)

RHO = 5.4
R_NOMINAL = 0.0762
EFF = EfficiencyChain()


def test_hover_induced_velocity_reference():
    assert hover_induced_velocity(0.2704, RHO, R_NOMINAL) == pytest.approx(1.1715, abs=5e-4)
    assert hover_induced_velocity(0.0, RHO, R_NOMINAL) == 0.0


def test_hover_scales_with_square_root():
    assert hover_induced_velocity(4.0, RHO, R_NOMINAL) == pytest.approx(2 * hover_induced_velocity(1.0, RHO, R_NOMINAL))


def test_zero_freestream_is_hover():
    for f in (0.1, 0.27, 3.0):
        assert induced_velocity(f, 0.0, 0.0, RHO, R_NOMINAL) == pytest.approx(
            hover_induced_velocity(f, RHO, R_NOMINAL), rel=1e-12
        )


def test_high_speed_asymptote_against_bisection():
    f = 0.2704
    vh = hover_induced_velocity(f, RHO, R_NOMINAL)
    V = 10 * vh
    oracle = brentq(lambda nu: glauert_residual(nu, f, V, 0.0, RHO, R_NOMINAL), 1e-9, vh, xtol=1e-15)
    nu = induced_velocity(f, V, 0.0, RHO, R_NOMINAL)
    assert nu == pytest.approx(oracle, rel=1e-10)
    assert nu == pytest.approx(vh**2 / V, rel=0.01)


def test_residual_over_random_operating_points():
    rng = np.random.default_rng(7)
    f = rng.uniform(0.0, 8.0, 1000)
    V = rng.uniform(0.0, 20.0, 1000)
    a = rng.uniform(-math.pi / 2, math.pi / 2, 1000)
    nu = induced_velocity(f, V, a, RHO, R_NOMINAL)
    assert np.max(np.abs(glauert_residual(nu, f, V, a, RHO, R_NOMINAL))) < 1e-10
    # scalar path agrees with the vectorised one
    for i in range(0, 1000, 97):
        assert induced_velocity(float(f[i]), float(V[i]), float(a[i]), RHO, R_NOMINAL) == pytest.approx(nu[i], abs=1e-10)


@given(st.floats(0.01, 8.0), st.floats(0.0, 30.0), st.floats(-1.5, 1.5))
def test_induced_velocity_nonnegative_root(f, V, a):
    nu = induced_velocity(f, V, a, RHO, R_NOMINAL)
    assert nu >= 0.0
    assert abs(glauert_residual(nu, f, V, a, RHO, R_NOMINAL)) < 1e-10


def test_hover_power_closed_form():
    f = 0.2704
    op = operating_point(f, 0.0, 0.0, RHO, R_NOMINAL)
    assert rotor_power(op, EFF) == pytest.approx(f * hover_induced_velocity(f, RHO, R_NOMINAL) / 0.4845, rel=1e-12)


def test_zero_thrust_zero_power():
    assert rotor_power(operating_point(0.0, 3.0, 0.2, RHO, R_NOMINAL), EFF) == 0.0


def test_power_clamped_in_windmill_descent():
    f = 0.05
    op = operating_point(f, 10.0, 1.2, RHO, R_NOMINAL)
    assert op.freestream * math.sin(op.alpha) > op.induced
    assert rotor_power(op, EFF) == 0.0


def test_operating_point_rejects_negative_thrust():
    with pytest.raises(ValueError):
        RotorOperatingPoint(-1.0, 0.0, 0.0, 0.0)


def test_vehicle_flying_additive(fly):
    params, env, eff = fly
    assert vehicle_power_flying(1.0, 0.1, np.zeros(4), params, env, eff) == 0.0
    single = rotor_power(operating_point(0.3, 1.0, 0.1, env.air_density, params.disk_radius), eff)
    total = vehicle_power_flying(1.0, 0.1, np.full(4, 0.3), params, env, eff)
    assert total == pytest.approx(4 * single, rel=1e-12)


def test_vehicle_flying_hover_weight(fly):
    params, env, eff = fly
    f = params.mass * env.gravity / 4
    vh = hover_induced_velocity(f, env.air_density, params.disk_radius)
    p = vehicle_power_flying(0.0, 0.0, np.full(4, f), params, env, eff)
    assert p == pytest.approx(4 * f * vh / eff.total, rel=1e-12)


def test_vehicle_flying_wrong_rotor_count(fly):
    params, env, eff = fly
    with pytest.raises(ValueError, match="expected 4"):
        vehicle_power_flying(1.0, 0.0, np.ones(8), params, env, eff)


def test_rolling_power_zero_when_idle(roll):
    params, env, eff = roll
    assert vehicle_power_rolling_phase_averaged(0.0, 0.0, params, env, eff) == 0.0


def test_rolling_power_phase_shift_invariant(roll):
    params, env, eff = roll
    base = vehicle_power_rolling_phase_averaged(0.14, 0.02, params, env, eff)
    shifted = vehicle_power_rolling_phase_averaged(0.14, 0.02, params, env, eff, phase_offset=2 * math.pi / 72)
    assert shifted == pytest.approx(base, rel=1e-12)


def test_rolling_power_sample_refinement(roll):
    params, env, eff = roll
    coarse = vehicle_power_rolling_phase_averaged(0.14, 0.02, params, env, eff, samples=72)
    fine = vehicle_power_rolling_phase_averaged(0.14, 0.02, params, env, eff, samples=720)
    assert coarse == pytest.approx(fine, rel=0.005)


def test_rolling_power_simplified_airflow_close_at_low_speed(roll):
    params, env, eff = roll
    local = vehicle_power_rolling_phase_averaged(0.05, 0.02, params, env, eff)
    simple = vehicle_power_rolling_phase_averaged(0.05, 0.02, params, env, eff, local_airflow=False)
    assert local > 0 and simple > 0
    assert local == pytest.approx(simple, rel=0.2)


def test_rolling_power_requires_docked_vehicle(fly):
    params, env, eff = fly
    with pytest.raises(ValueError, match="8-rotor"):
        vehicle_power_rolling_phase_averaged(0.1, 0.1, params, env, eff)
