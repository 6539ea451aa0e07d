"""Newton-Euler equations for the rolling shell and the flying special case.

Translation (inertial frame)::

    m xdd = R f_cmd - m g z + r + f_drag

Rotation (body frame)::

    J wd = tau_cmd - w x J w - l R^T (n x r) + tau_rolling

The reaction ``r`` is not an input: it is the constraint force that keeps the
shell on the ground (zero normal acceleration relative to the contact
geometry) and rolling without slip (tangential acceleration equals
``l * wd_y``). Both constraints are linear in ``r`` so they are solved in
closed form at every evaluation. A negative normal reaction means the shell
is lifting off; the flying equations (``r = 0``) then apply.

Rolling is planar: motion in the inertial x-z plane with spin about y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Environment, Rotation, Vec3, VehicleParams, pitch_of, plane_normal

Z_HAT = np.array([0.0, 0.0, 1.0])
Y_HAT = np.array([0.0, 1.0, 0.0])


@dataclass(frozen=True, eq=False)
class RigidBodyState:
    position: Vec3
    velocity: Vec3
    orientation: Rotation
    body_rates: Vec3

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.position, self.velocity, np.asarray(self.orientation).ravel(), self.body_rates]
        )

    @classmethod
    def from_vector(cls, y: np.ndarray) -> "RigidBodyState":
        y = np.asarray(y, dtype=float)
        return cls(y[0:3].copy(), y[3:6].copy(), y[6:15].reshape(3, 3).copy(), y[15:18].copy())

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0), orientation=None) -> "RigidBodyState":
        R = np.eye(3) if orientation is None else np.asarray(orientation, dtype=float)
        return cls(np.asarray(position, dtype=float), np.zeros(3), R, np.zeros(3))

    @property
    def pitch(self) -> float:
        return pitch_of(self.orientation)


@dataclass(frozen=True, eq=False)
class Wrench:
    """Collective thrust along +z_B and body torque."""

    thrust: float
    torque: Vec3

    @classmethod
    def zero(cls) -> "Wrench":
        return cls(0.0, np.zeros(3))


@dataclass(frozen=True, eq=False)
class ContactInfo:
    normal: Vec3
    reaction: Vec3
    in_contact: bool

    @property
    def normal_force(self) -> float:
        return float(self.reaction @ self.normal)


@dataclass(frozen=True, eq=False)
class StateDerivative:
    velocity: Vec3
    acceleration: Vec3
    orientation_rate: np.ndarray
    angular_acceleration: Vec3

    def to_vector(self) -> np.ndarray:
        return np.concatenate(
            [self.velocity, self.acceleration, self.orientation_rate.ravel(), self.angular_acceleration]
        )


def aerodynamic_area(pitch: float, params: VehicleParams) -> float:
    """Projected frontal area of the Cobot base at the given pitch."""
    return (
        params.rotor_height * abs(math.cos(pitch)) + 2.0 * params.shell_radius * abs(math.sin(pitch))
    ) * params.shell_width


def mean_rolling_area(params: VehicleParams) -> float:
    """``aerodynamic_area`` averaged over a full revolution of the shell."""
    return 2.0 / math.pi * (params.rotor_height + 2.0 * params.shell_radius) * params.shell_width


def drag_force(velocity: Vec3, pitch: float, params: VehicleParams, env: Environment) -> Vec3:
    v = np.asarray(velocity, dtype=float)
    area = aerodynamic_area(pitch, params)
    return -0.5 * env.drag_coefficient * env.air_density * area * np.linalg.norm(v) * v


def rolling_resistance_torque(contact: ContactInfo, body_rate_y: float, params: VehicleParams, env: Environment) -> Vec3:
    """Body-frame torque opposing the spin, proportional to the normal load."""
    if not contact.in_contact:
        return np.zeros(3)
    sign = math.copysign(1.0, body_rate_y) if body_rate_y != 0.0 else 0.0
    return np.array([0.0, -sign * env.rolling_resistance * contact.normal_force * params.shell_radius, 0.0])


def newton_euler(
    state: RigidBodyState,
    wrench: Wrench,
    params: VehicleParams,
    env: Environment,
    reaction: Vec3 | None = None,
    normal: Vec3 | None = None,
    rolling_torque: Vec3 | None = None,
) -> StateDerivative:
    """Evaluate both equations for a given reaction force and rolling torque."""
    R = np.asarray(state.orientation)
    w = np.asarray(state.body_rates)
    J = np.asarray(params.inertia)
    force = wrench.thrust * R[:, 2] - params.mass * env.gravity * Z_HAT
    force = force + drag_force(state.velocity, pitch_of(R), params, env)
    torque = np.asarray(wrench.torque, dtype=float) - np.cross(w, J @ w)
    if reaction is not None:
        force = force + reaction
        torque = torque - params.shell_radius * (R.T @ np.cross(normal, reaction))
    if rolling_torque is not None:
        torque = torque + rolling_torque
    return StateDerivative(
        velocity=np.array(state.velocity, dtype=float),
        acceleration=force / params.mass,
        orientation_rate=R @ _skew(w),
        angular_acceleration=np.linalg.solve(J, torque),
    )


def flying_derivatives(state: RigidBodyState, wrench: Wrench, params: VehicleParams, env: Environment) -> StateDerivative:
    return newton_euler(state, wrench, params, env)


def contact_reaction(
    state: RigidBodyState,
    wrench: Wrench,
    params: VehicleParams,
    env: Environment,
    normal: Vec3 | None = None,
    normal_acceleration: float = 0.0,
) -> ContactInfo:
    """Reaction force enforcing no-penetration and no-slip simultaneously.

    ``normal_acceleration`` is the centripetal term of a curved contact path
    (zero on a plane). If the required normal force is negative the shell is
    leaving the ground and ``in_contact`` is False with zero reaction.
    """
    n = plane_normal(env.slope) if normal is None else np.asarray(normal, dtype=float)
    free = newton_euler(state, wrench, params, env)
    rt, rn = _solve_reaction(
        n, free.acceleration * params.mass, _free_torque(state, wrench, params),
        state.orientation, state.body_rates[1], params, env.rolling_resistance, normal_acceleration,
    )
    if rn < 0.0:
        return ContactInfo(n, np.zeros(3), False)
    return ContactInfo(n, rt * _tangent(n) + rn * n, True)


def rolling_derivatives(
    state: RigidBodyState,
    wrench: Wrench,
    params: VehicleParams,
    env: Environment,
    normal: Vec3 | None = None,
    normal_acceleration: float = 0.0,
) -> StateDerivative:
    contact = contact_reaction(state, wrench, params, env, normal, normal_acceleration)
    if not contact.in_contact:
        return flying_derivatives(state, wrench, params, env)
    rr = rolling_resistance_torque(contact, state.body_rates[1], params, env)
    return newton_euler(state, wrench, params, env, contact.reaction, contact.normal, rr)


def _skew(v) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _tangent(n: Vec3) -> Vec3:
    # y x n: direction of travel for positive spin about y
    return np.array([n[2], 0.0, -n[0]])


def _free_torque(state: RigidBodyState, wrench: Wrench, params: VehicleParams) -> Vec3:
    J = np.asarray(params.inertia)
    w = np.asarray(state.body_rates)
    return np.asarray(wrench.torque, dtype=float) - np.cross(w, J @ w)


def _solve_reaction(n, free_force, free_torque, R, wy, params: VehicleParams, crr: float, normal_acceleration: float):
    """Tangential and normal reaction components for the rolling constraints.

    The normal equation decouples; the tangential one follows from the
    pitch-axis row of the rotational dynamics with the reaction moment and
    rolling-resistance torque substituted in.
    """
    m, l = params.mass, params.shell_radius
    J = np.asarray(params.inertia)
    t = _tangent(n)
    rn = m * normal_acceleration - float(n @ free_force)
    sign = math.copysign(1.0, wy) if wy != 0.0 else 0.0
    # reaction moment per unit r_t is -l R^T (n x t) = -l R^T y
    moment_rt = -l * (np.asarray(R).T @ Y_HAT)
    moment_rn = np.array([0.0, -sign * crr * l, 0.0])
    wd0 = np.linalg.solve(J, free_torque)
    wd_rt = np.linalg.solve(J, moment_rt)
    wd_rn = np.linalg.solve(J, moment_rn)
    rt = (l * (wd0[1] + rn * wd_rn[1]) - float(t @ free_force) / m) / (1.0 / m - l * wd_rt[1])
    return rt, rn
