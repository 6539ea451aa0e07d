"""Body-rate PI control with pure-torque allocation, and a minimal flight loop.

Rolling: a PI law on body rates yields a torque with zero net thrust. The
torque is split over the four opposite-rotor pairs (A..D) by inverting the
4x4 matrix that maps pair forces to ``(f_cmd, tau)``, and each signed pair
force spins exactly one rotor of its pair.

Flying: velocity and altitude errors set a desired force, whose direction
fixes the tilt and whose projection on body z is the collective thrust; an
attitude PD closes the inner loop.
"""

from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass, field, replace

import numpy as np

from .core import Environment, ModelError, VehicleParams, pitch_of, rotation_about_y, rotor_layout
from .dynamics import RigidBodyState, Wrench, drag_force

DEFAULT_KP = 0.05
DEFAULT_KI = 0.02
DEFAULT_INTEGRAL_LIMIT = 0.5


def _diag3(x) -> np.ndarray:
    if isinstance(x, np.ndarray) and x.shape == (3,) and x.dtype == np.float64:
        return x
    a = np.asarray(x, dtype=float)
    if a.ndim == 2:
        a = np.diag(a)
    return np.broadcast_to(a, (3,)).astype(float)


@dataclass(frozen=True, eq=False)
class RateControllerState:
    """Gains (diagonals), integral of rate error and its symmetric clamp."""

    kp: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_KP))
    ki: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_KI))
    integral_limit: np.ndarray = field(default_factory=lambda: np.full(3, DEFAULT_INTEGRAL_LIMIT))
    integral: np.ndarray = field(default_factory=lambda: np.zeros(3))
    prev_error: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        for name in ("kp", "ki", "integral_limit", "integral", "prev_error"):
            object.__setattr__(self, name, _diag3(getattr(self, name)))
        if np.any(self.kp < 0) or np.any(self.ki < 0) or np.any(self.integral_limit < 0):
            raise ValueError("gains and integral limit must be non-negative")


def pi_rate_control(omega_des, omega_meas, ctl: RateControllerState, dt: float) -> tuple[Wrench, RateControllerState]:
    """One PI update; trapezoidal integration, clamped (anti-windup).

    The output never carries net thrust.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    e = np.asarray(omega_des, dtype=float) - np.asarray(omega_meas, dtype=float)
    integral = ctl.integral + 0.5 * (e + ctl.prev_error) * dt
    integral = np.clip(integral, -ctl.integral_limit, ctl.integral_limit)
    torque = ctl.kp * e + ctl.ki * integral
    return Wrench(0.0, torque), replace(ctl, integral=integral, prev_error=e)


def allocation_matrix(params: VehicleParams) -> np.ndarray:
    """Map from pair forces ``(f_A..f_D)`` to ``(f_cmd, tau_x, tau_y, tau_z)``."""
    c = params.pair_offset
    k = params.k_torque
    return np.array(
        [
            [1.0, 1.0, 1.0, 1.0],
            [-c, c, c, -c],
            [-c, -c, c, c],
            [-k, k, -k, k],
        ]
    )


@dataclass(frozen=True, eq=False)
class PairForces:
    """Signed pair forces (docked shell) or rotor thrusts (single Cobot)."""

    forces: np.ndarray
    saturated: bool = False

    def __getitem__(self, i):
        return self.forces[i]


@dataclass(frozen=True, eq=False)
class RotorSpeeds:
    speeds: np.ndarray

    def thrusts(self, k_thrust: float) -> np.ndarray:
        return k_thrust * self.speeds**2


def allocate(wrench: Wrench, params: VehicleParams) -> PairForces:
    """Invert the allocation matrix; scale or clip when a rotor would saturate.

    On the docked shell the pair forces are signed and the whole vector is
    scaled down uniformly (keeping the torque direction) if any exceeds the
    rotor limit. A single Cobot cannot reverse thrust, so its rotor forces
    are clipped to ``[0, max]`` instead.
    """
    target = np.concatenate([[wrench.thrust], np.asarray(wrench.torque, dtype=float)])
    f = _allocation_inverse(params) @ target
    fmax = params.max_rotor_thrust
    if params.rotor_count == 8:
        peak = np.max(np.abs(f))
        if peak > fmax:
            return PairForces(f * (fmax / peak), True)
        return PairForces(f, False)
    clipped = np.clip(f, 0.0, fmax)
    return PairForces(clipped, bool(np.any(clipped != f)))


def pair_to_speeds(pair: PairForces, k_thrust: float) -> RotorSpeeds:
    """Spin the first rotor of a pair for positive force, the opposite one otherwise."""
    if not k_thrust > 0:
        raise ValueError("k_thrust must be positive")
    f = np.asarray(pair.forces, dtype=float)
    speeds = np.zeros(8)
    speeds[:4] = np.sqrt(np.where(f >= 0, f, 0.0) / k_thrust)
    speeds[4:] = np.sqrt(np.where(f < 0, -f, 0.0) / k_thrust)
    return RotorSpeeds(speeds)


def rotor_speeds(wrench: Wrench, params: VehicleParams) -> tuple[RotorSpeeds, bool]:
    """Allocate a wrench all the way to rotor speeds for either vehicle."""
    pair = allocate(wrench, params)
    if params.rotor_count == 8:
        return pair_to_speeds(pair, params.k_thrust), pair.saturated
    return RotorSpeeds(np.sqrt(pair.forces / params.k_thrust)), pair.saturated


@lru_cache(maxsize=64)
def _allocation_inverse(params: VehicleParams) -> np.ndarray:
    return np.linalg.inv(allocation_matrix(params))


@lru_cache(maxsize=64)
def rotor_wrench_matrix(params: VehicleParams) -> np.ndarray:
    """Linear map from individual rotor thrusts to ``(thrust along z_B, tau)``."""
    pos, dirs, yaw = rotor_layout(params)
    G = np.zeros((4, len(pos)))
    G[0] = dirs[:, 2]
    G[1:] = np.cross(pos, dirs).T
    G[3] += params.k_torque * yaw
    G.setflags(write=False)
    return G


def wrench_from_speeds(speeds: RotorSpeeds, params: VehicleParams) -> Wrench:
    """Net thrust along z_B and body torque actually produced by the rotors."""
    out = rotor_wrench_matrix(params) @ speeds.thrusts(params.k_thrust)
    return Wrench(float(out[0]), out[1:])


@dataclass(frozen=True)
class FlightGains:
    velocity: float = 1.0
    altitude: float = 0.5
    climb: float = 1.5
    attitude: float = 25.0
    rate: float = 10.0
    max_tilt: float = math.radians(60.0)


def flight_velocity_controller(
    v_des: float,
    state: RigidBodyState,
    params: VehicleParams,
    env: Environment,
    *,
    altitude_ref: float,
    climb_rate_ref: float = 0.0,
    gains: FlightGains = FlightGains(),
) -> Wrench:
    """Cascaded horizontal-velocity / altitude-hold / attitude controller.

    The current drag is fed forward, so in steady level flight the tilt
    satisfies ``tan(tilt) = drag / (m g)`` and the thrust equals
    ``hypot(m g, drag)``.
    """
    m = params.mass
    v = np.asarray(state.velocity)
    R = np.asarray(state.orientation)
    drag = drag_force(v, pitch_of(R), params, env)
    accel = np.array(
        [
            gains.velocity * (v_des - v[0]),
            -gains.velocity * v[1],
            gains.altitude * (altitude_ref - state.position[2]) + gains.climb * (climb_rate_ref - v[2]),
        ]
    )
    force = m * accel - drag
    force[2] += m * env.gravity
    tilt = math.atan2(force[0], force[2])
    if abs(tilt) > gains.max_tilt:
        raise ModelError(f"commanded tilt {math.degrees(tilt):.1f} deg exceeds {math.degrees(gains.max_tilt):.0f} deg")
    thrust = max(float(force @ R[:, 2]), 0.0)
    R_des = rotation_about_y(tilt)
    E = R_des.T @ R - R.T @ R_des
    e_R = 0.5 * np.array([E[2, 1], E[0, 2], E[1, 0]])
    J = np.asarray(params.inertia)
    w = np.asarray(state.body_rates)
    Jw = J @ w
    gyro = np.array([w[1] * Jw[2] - w[2] * Jw[1], w[2] * Jw[0] - w[0] * Jw[2], w[0] * Jw[1] - w[1] * Jw[0]])
    torque = J @ (-gains.attitude * e_R - gains.rate * w) + gyro
    return Wrench(thrust, torque)
