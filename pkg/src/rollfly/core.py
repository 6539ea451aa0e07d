"""Shared primitives: rotations, vehicle/environment records, presets, validation.

All quantities are SI; angles are radians. Vectors are plain ``numpy`` arrays of
shape ``(3,)`` and rotations are ``(3, 3)`` arrays mapping body-frame vectors to
the inertial frame.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

Vec3 = np.ndarray
Rotation = np.ndarray

# Geometric rotor radius for a 6-inch propeller.
NOMINAL_DISK_RADIUS = 0.0762
# Disk radius selected by ``rollfly.analysis.calibrate_disk_radius`` over
# [0.05, 0.10] m; see calibration.json at the repository root.
CALIBRATED_DISK_RADIUS = 0.05

TITAN_GRAVITY = 1.352
TITAN_AIR_DENSITY = 5.4

# One rotor gives 8 N (a quarter of ~32 N per Cobot) at 2500 rad/s.
DEFAULT_MAX_ROTOR_THRUST = 8.0
DEFAULT_K_THRUST = DEFAULT_MAX_ROTOR_THRUST / 2500.0**2
DEFAULT_K_TORQUE = 0.016
DEFAULT_ARM_LENGTH = 0.14

ORTHONORMAL_TOL = 1e-9


class ModelError(ValueError):
    """Inputs outside the validity region of a model (infeasible regime)."""


def rotation_about_y(angle: float) -> Rotation:
    """Proper rotation by ``angle`` about the y axis."""
    if not math.isfinite(angle):
        raise ValueError(f"angle must be finite, got {angle!r}")
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def orthonormalize(R: Rotation) -> Rotation:
    """One Newton step towards the polar factor: ``1.5 R - 0.5 R R^T R``.

    Quadratically convergent for matrices already close to orthonormal, which
    is all that repeated products of rotations ever produce.
    """
    return 1.5 * R - 0.5 * (R @ R.T @ R)


def compose(a: Rotation, b: Rotation) -> Rotation:
    """Product ``a @ b`` with re-orthonormalization, so long chains stay proper."""
    return orthonormalize(a @ b)


def is_rotation(R: Rotation, tol: float = ORTHONORMAL_TOL) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        return False
    return bool(
        np.max(np.abs(R.T @ R - np.eye(3))) <= tol
        and abs(np.linalg.det(R) - 1.0) <= tol
    )


def pitch_of(R: Rotation) -> float:
    """Pitch angle about y, so that ``rotation_about_y(pitch_of(R))`` matches a planar R."""
    return math.atan2(R[0, 2], R[2, 2])


def skew(v: Vec3) -> np.ndarray:
    return np.array([[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]])


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=float)
    arr.setflags(write=False)
    return arr


def cylinder_inertia(mass: float, radius: float, width: float) -> np.ndarray:
    """Uniform solid cylinder with its axis along body y."""
    side = mass * (3.0 * radius**2 + width**2) / 12.0
    return np.diag([side, 0.5 * mass * radius**2, side])


def box_inertia(mass: float, length_x: float, width_y: float, height_z: float) -> np.ndarray:
    return np.diag(
        [
            mass * (width_y**2 + height_z**2) / 12.0,
            mass * (length_x**2 + height_z**2) / 12.0,
            mass * (length_x**2 + width_y**2) / 12.0,
        ]
    )


@dataclass(frozen=True, eq=False)
class VehicleParams:
    """Mass properties, shell geometry and rotor constants of one vehicle.

    ``rotor_count`` is 4 for a single flying Cobot and 8 for the docked pair
    that rolls. Thrust per rotor is ``k_thrust * n**2`` and its reaction torque
    ``k_torque * thrust``.
    """

    mass: float
    inertia: np.ndarray
    shell_radius: float
    shell_width: float
    rotor_height: float
    arm_length: float
    k_thrust: float
    k_torque: float
    rotor_count: int
    disk_radius: float
    battery_energy: float
    max_rotor_thrust: float = DEFAULT_MAX_ROTOR_THRUST

    def __post_init__(self):
        object.__setattr__(self, "inertia", _readonly(self.inertia))

    @property
    def pair_offset(self) -> float:
        """Rotor offset along each body axis, ``a / sqrt(2)``."""
        return self.arm_length / math.sqrt(2.0)

    def with_(self, **changes) -> "VehicleParams":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["inertia"] = np.asarray(self.inertia).tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleParams":
        return cls(**d)


@dataclass(frozen=True)
class Environment:
    gravity: float = TITAN_GRAVITY
    air_density: float = TITAN_AIR_DENSITY
    drag_coefficient: float = 2.1
    rolling_resistance: float = 0.01
    slope: float = 0.0

    def with_(self, **changes) -> "Environment":
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EfficiencyChain:
    """Propeller, motor and speed-controller efficiencies."""

    propeller: float = 0.6
    motor: float = 0.85
    controller: float = 0.95

    @property
    def total(self) -> float:
        return self.propeller * self.motor * self.controller

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS = ("titan_table1_roll", "titan_table1_fly")


def preset(
    name: str, *, disk_radius: float = CALIBRATED_DISK_RADIUS
) -> tuple[VehicleParams, Environment, EfficiencyChain]:
    """Titan parameter sets for the docked rolling pair or one flying Cobot.

    Each Cobot is 0.8 kg and carries 870 kJ; the rolling pair doubles both.
    """
    shell_radius, shell_width = 0.2, 0.4
    if name == "titan_table1_roll":
        mass, rotors, height, energy = 1.6, 8, 0.16, 1.74e6
        inertia = cylinder_inertia(mass, shell_radius, shell_width)
    elif name == "titan_table1_fly":
        mass, rotors, height, energy = 0.8, 4, 0.08, 8.7e5
        inertia = box_inertia(mass, 2 * shell_radius, shell_width, height)
    else:
        raise KeyError(f"unknown preset {name!r}; expected one of {', '.join(PRESETS)}")
    params = VehicleParams(
        mass=mass,
        inertia=inertia,
        shell_radius=shell_radius,
        shell_width=shell_width,
        rotor_height=height,
        arm_length=DEFAULT_ARM_LENGTH,
        k_thrust=DEFAULT_K_THRUST,
        k_torque=DEFAULT_K_TORQUE,
        rotor_count=rotors,
        disk_radius=disk_radius,
        battery_energy=energy,
    )
    return params, Environment(), EfficiencyChain()


def validate(params: VehicleParams, env: Environment | None = None) -> list[str]:
    """Return every violated invariant as a message naming the field; empty means valid."""
    problems: list[str] = []
    positive = {
        "mass": params.mass,
        "shell_radius": params.shell_radius,
        "shell_width": params.shell_width,
        "rotor_height": params.rotor_height,
        "arm_length": params.arm_length,
        "k_thrust": params.k_thrust,
        "k_torque": params.k_torque,
        "disk_radius": params.disk_radius,
        "battery_energy": params.battery_energy,
        "max_rotor_thrust": params.max_rotor_thrust,
    }
    for key, value in positive.items():
        if not (math.isfinite(value) and value > 0):
            problems.append(f"{key} must be positive")
    if params.rotor_count not in (4, 8):
        problems.append("rotor_count must be 4 or 8")
    J = np.asarray(params.inertia)
    if J.shape != (3, 3) or not np.all(np.isfinite(J)):
        problems.append("inertia must be a finite 3x3 matrix")
    elif not np.allclose(J, J.T) or np.min(np.linalg.eigvalsh(J)) <= 0:
        problems.append("inertia must be symmetric positive definite")

    if env is not None:
        if not env.gravity > 0:
            problems.append("gravity must be positive")
        if not env.air_density > 0:
            problems.append("air_density must be positive")
        if not env.drag_coefficient > 0:
            problems.append("drag_coefficient must be positive")
        if not 0.0 <= env.rolling_resistance <= 1.0:
            problems.append("C_rr out of range [0, 1]")
        if not -math.pi / 2 < env.slope < math.pi / 2:
            problems.append("slope out of range (-pi/2, pi/2)")
    return problems


def rotor_layout(params: VehicleParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Body-frame rotor positions, unit thrust directions and yaw-torque signs.

    Rotors 1-4 sit at the pair offsets ``(+c,-c) (+c,+c) (-c,+c) (-c,-c)`` and push
    along +z_B. On the docked pair, rotors 5-8 share those x/y offsets on the
    opposite face (z = -h/2) and push along -z_B, so pair k is ``(k, k+4)``.
    """
    c = params.pair_offset
    xy = np.array([[c, -c], [c, c], [-c, c], [-c, -c]])
    yaw = np.array([-1.0, 1.0, -1.0, 1.0])
    if params.rotor_count == 4:
        pos = np.column_stack([xy, np.zeros(4)])
        dirs = np.tile([0.0, 0.0, 1.0], (4, 1))
        return pos, dirs, yaw
    half = params.rotor_height / 2.0
    pos = np.vstack([np.column_stack([xy, np.full(4, half)]), np.column_stack([xy, np.full(4, -half)])])
    dirs = np.vstack([np.tile([0.0, 0.0, 1.0], (4, 1)), np.tile([0.0, 0.0, -1.0], (4, 1))])
    return pos, dirs, np.concatenate([yaw, -yaw])


def plane_normal(slope: float) -> Vec3:
    """Upward unit normal of a plane rising at ``slope`` along +x."""
    return np.array([-math.sin(slope), 0.0, math.cos(slope)])


def plane_tangent(slope: float) -> Vec3:
    """Uphill unit tangent; equals ``y x n`` so forward rolling has omega_y > 0."""
    return np.array([math.cos(slope), 0.0, math.sin(slope)])
