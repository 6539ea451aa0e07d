"""Closed-loop integration of the hybrid rolling/flying vehicle with energy accounting.

Each step holds the rotor command fixed (zero-order hold) and the contact
mode fixed: in contact, the reaction is solved inside every derivative
evaluation; airborne, it is zero. After the step the orientation is
re-orthonormalized and, in contact, the state is projected back onto the
constraint (centre at shell radius from the ground, no normal velocity,
no slip). The small energy change from that projection, and from inelastic
touchdowns, is booked as contact loss so the audit still closes.

The derivative is written with plain floats rather than numpy; for 3-vectors
that is several times faster, and long runs are dominated by it. In the
plane of motion it matches ``rollfly.dynamics`` to rounding (see the tests).
In contact the shell touches the ground along a line across its width, which
also holds roll, yaw and sideways motion at zero; without that the body-frame
rate loop lets tiny out-of-plane rates grow during long rolling runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..control import (
    FlightGains,
    RateControllerState,
    RotorSpeeds,
    flight_velocity_controller,
    pi_rate_control,
    rotor_speeds,
    wrench_from_speeds,
)
from ..core import EfficiencyChain, Environment, ModelError, VehicleParams, orthonormalize, rotor_layout
from ..dynamics import RigidBodyState, Wrench
from ..power import InducedVelocityError, _induced_scalar
from .terrain import Terrain

INTEGRATORS = ("rk4", "semi_implicit_euler")
SEGMENT_MODES = ("rolling", "flying", "passive")
CONTACT_TOL = 1e-9
# rows of the augmented state after the 18 rigid-body entries
WORK, DRAG, ROLLING = 18, 19, 20
STATE_LEN = 21

CSV_COLUMNS = (
    "t_s", "x_m", "y_m", "z_m", "vx_mps", "vy_mps", "vz_mps", "pitch_rad",
    "wx_radps", "wy_radps", "wz_radps", "thrust_N", "tau_x_Nm", "tau_y_Nm", "tau_z_Nm",
    *(f"n{i}_radps" for i in range(1, 9)),
    "power_W", "energy_J", "distance_m", "in_contact",
)


class SimError(RuntimeError):
    """The run cannot continue (non-finite state, infeasible command, ground strike)."""


class _Plant:
    """Float-only derivative of the rigid body plus work/dissipation rates."""

    def __init__(self, params: VehicleParams, env: Environment):
        self.m = params.mass
        self.l = params.shell_radius
        self.g = env.gravity
        self.crr = env.rolling_resistance
        self.h = params.rotor_height
        self.width = params.shell_width
        self.half_cd_rho = 0.5 * env.drag_coefficient * env.air_density
        J = np.asarray(params.inertia, dtype=float)
        self.J = J.ravel().tolist()
        self.Jinv = np.linalg.inv(J).ravel().tolist()
        self.Jyy = float(J[1, 1])

    def free_force(self, y, thrust):
        vx, vy, vz = y[3], y[4], y[5]
        r02, r12, r22 = y[8], y[11], y[14]
        pitch = math.atan2(r02, r22)
        area = (self.h * abs(math.cos(pitch)) + 2.0 * self.l * abs(math.sin(pitch))) * self.width
        k = -self.half_cd_rho * area * math.sqrt(vx * vx + vy * vy + vz * vz)
        return (thrust * r02 + k * vx, thrust * r12 + k * vy, thrust * r22 - self.m * self.g + k * vz, k)

    def normal_force(self, y, thrust, contact) -> float:
        nx, nz, an = contact
        fx, _, fz, _ = self.free_force(y, thrust)
        return self.m * an - (nx * fx + nz * fz)

    def rhs(self, y, thrust, tx, ty, tz, contact):
        m, l = self.m, self.l
        vx, vy, vz = y[3], y[4], y[5]
        r00, r01, r02, r10, r11, r12, r20, r21, r22 = y[6:15]
        wx, wy, wz = y[15], y[16], y[17]
        fx, fy, fz, k = self.free_force(y, thrust)
        J, Ji = self.J, self.Jinv
        jx = J[0] * wx + J[1] * wy + J[2] * wz
        jy = J[3] * wx + J[4] * wy + J[5] * wz
        jz = J[6] * wx + J[7] * wy + J[8] * wz
        Tx = tx - (wy * jz - wz * jy)
        Ty = ty - (wz * jx - wx * jz)
        Tz = tz - (wx * jy - wy * jx)
        if contact is not None:
            nx, nz, an = contact
            rn = m * an - (nx * fx + nz * fz)
            if rn >= 0.0:
                # Line contact across the shell width: it also carries roll and
                # yaw moments and lateral friction, so only the pitch row of the
                # rotational dynamics is free, with inertia exactly J_yy.
                crr = self.crr
                s = (wy > 0.0) - (wy < 0.0)
                inv_yy = 1.0 / self.Jyy
                my = -l * r11  # pitch moment per unit tangential reaction
                t_x, t_z = nz, -nx
                rt = ((l * inv_yy * (Ty - s * crr * rn * l) - (t_x * fx + t_z * fz) / m)
                      / (1.0 / m - l * inv_yy * my))
                fx += rt * t_x + rn * nx
                fz += rt * t_z + rn * nz
                Ty += rt * my - s * crr * rn * l
                return [
                    vx, vy, vz,
                    fx / m, 0.0, fz / m,
                    r01 * wz - r02 * wy, r02 * wx - r00 * wz, r00 * wy - r01 * wx,
                    r11 * wz - r12 * wy, r12 * wx - r10 * wz, r10 * wy - r11 * wx,
                    r21 * wz - r22 * wy, r22 * wx - r20 * wz, r20 * wy - r21 * wx,
                    0.0, Ty * inv_yy, 0.0,
                    thrust * (r02 * vx + r12 * vy + r22 * vz) + ty * wy,
                    -k * (vx * vx + vy * vy + vz * vz),
                    crr * rn * l * abs(wy),
                ]
        return [
            vx, vy, vz,
            fx / m, fy / m, fz / m,
            r01 * wz - r02 * wy, r02 * wx - r00 * wz, r00 * wy - r01 * wx,
            r11 * wz - r12 * wy, r12 * wx - r10 * wz, r10 * wy - r11 * wx,
            r21 * wz - r22 * wy, r22 * wx - r20 * wz, r20 * wy - r21 * wx,
            Ji[0] * Tx + Ji[1] * Ty + Ji[2] * Tz,
            Ji[3] * Tx + Ji[4] * Ty + Ji[5] * Tz,
            Ji[6] * Tx + Ji[7] * Ty + Ji[8] * Tz,
            thrust * (r02 * vx + r12 * vy + r22 * vz) + tx * wx + ty * wy + tz * wz,
            -k * (vx * vx + vy * vy + vz * vz),
            0.0,
        ]

    def advance(self, y, wrench: Wrench, contact, dt: float, integrator: str):
        f = wrench.thrust
        tx, ty, tz = (float(c) for c in wrench.torque)
        rhs = self.rhs
        if integrator == "rk4":
            k1 = rhs(y, f, tx, ty, tz, contact)
            h = 0.5 * dt
            k2 = rhs([a + h * b for a, b in zip(y, k1)], f, tx, ty, tz, contact)
            k3 = rhs([a + h * b for a, b in zip(y, k2)], f, tx, ty, tz, contact)
            k4 = rhs([a + dt * b for a, b in zip(y, k3)], f, tx, ty, tz, contact)
            c = dt / 6.0
            out = [a + c * (b1 + 2.0 * b2 + 2.0 * b3 + b4) for a, b1, b2, b3, b4 in zip(y, k1, k2, k3, k4)]
        elif integrator == "semi_implicit_euler":
            k = rhs(y, f, tx, ty, tz, contact)
            out = [a + dt * b for a, b in zip(y, k)]
            # positions and attitude use the updated rates
            for i in range(3):
                out[i] = y[i] + dt * out[3 + i]
            R = np.array(y[6:15]).reshape(3, 3)
            w = out[15:18]
            S = np.array([[0.0, -w[2], w[1]], [w[2], 0.0, -w[0]], [-w[1], w[0], 0.0]])
            out[6:15] = (R + dt * R @ S).ravel().tolist()
        else:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        R = orthonormalize(orthonormalize(np.array(out[6:15]).reshape(3, 3)))
        out[6:15] = R.ravel().tolist()
        return out

    def mechanical_energy(self, y) -> tuple[float, float]:
        """Kinetic and potential (datum z = 0) energy of a state vector."""
        vx, vy, vz = y[3], y[4], y[5]
        wx, wy, wz = y[15], y[16], y[17]
        J = self.J
        rot = wx * (J[0] * wx + J[1] * wy + J[2] * wz) + wy * (J[3] * wx + J[4] * wy + J[5] * wz) \
            + wz * (J[6] * wx + J[7] * wy + J[8] * wz)
        return 0.5 * self.m * (vx * vx + vy * vy + vz * vz) + 0.5 * rot, self.m * self.g * y[2]


class _RotorPower:
    """Electrical rotor power at the actual thrusts and local airflow of each rotor."""

    def __init__(self, params: VehicleParams, env: Environment, eff: EfficiencyChain):
        pos, dirs, _ = rotor_layout(params)
        self.pos = pos.tolist()
        self.dirs = dirs.tolist()
        self.rho = env.air_density
        self.radius = params.disk_radius
        self.eta = eff.total
        self.k_thrust = params.k_thrust
        self.guess = [None] * len(self.pos)

    def __call__(self, y, thrusts) -> float:
        vx, vy, vz = y[3], y[4], y[5]
        r = y[6:15]
        wx, wy, wz = y[15], y[16], y[17]
        total = 0.0
        for i, f in enumerate(thrusts):
            if f <= 0.0:
                continue
            px, py, pz = self.pos[i]
            dx, dy, dz = self.dirs[i]
            # rotor velocity: v + R (w x p)
            cx, cy, cz = wy * pz - wz * py, wz * px - wx * pz, wx * py - wy * px
            ux = vx + r[0] * cx + r[1] * cy + r[2] * cz
            uy = vy + r[3] * cx + r[4] * cy + r[5] * cz
            uz = vz + r[6] * cx + r[7] * cy + r[8] * cz
            ex = r[0] * dx + r[1] * dy + r[2] * dz
            ey = r[3] * dx + r[4] * dy + r[5] * dz
            ez = r[6] * dx + r[7] * dy + r[8] * dz
            V = math.sqrt(ux * ux + uy * uy + uz * uz)
            sina = -(ux * ex + uy * ey + uz * ez) / V if V > 0.0 else 0.0
            sina = min(1.0, max(-1.0, sina))
            nu = _induced_scalar(f, V, math.asin(sina), self.rho, self.radius, self.guess[i])
            self.guess[i] = nu
            total += max(f * (nu - V * sina), 0.0)
        return total / self.eta


def _contact_feature(terrain: Terrain, y, l: float):
    return terrain.closest(y[0], y[2], 2.0 * l)


def _contact_tuple(feature, y, l: float):
    if not feature.vertex:
        return (feature.nx, feature.nz, 0.0)
    vt = y[3] * feature.nz - y[5] * feature.nx
    return (feature.nx, feature.nz, -vt * vt / max(feature.distance, 1e-12))


def _project(plant: _Plant, terrain: Terrain, y):
    """Put the centre back at one shell radius, remove normal velocity, enforce no slip.

    Lateral velocity and roll/yaw rates are cleared as the line contact allows none.

    Returns the projected state and the mechanical energy it removed. The
    no-slip correction conserves angular momentum about the contact point.
    """
    l = plant.l
    before = sum(plant.mechanical_energy(y))
    f = _contact_feature(terrain, y, l)
    out = list(y)
    gap = f.distance - l
    out[0] -= gap * f.nx
    out[2] -= gap * f.nz
    tx, tz = f.nz, -f.nx
    vt = out[3] * tx + out[5] * tz
    m, J = plant.m, plant.Jyy
    w = (m * l * vt + J * out[16]) / (m * l * l + J)
    vt = l * w
    out[3], out[5], out[16] = vt * tx, vt * tz, w
    # the line contact holds roll, yaw and lateral motion at zero
    out[4] = out[15] = out[17] = 0.0
    return out, before - sum(plant.mechanical_energy(out))


def _finite(y) -> bool:
    return all(math.isfinite(v) for v in y)


def step(state: RigidBodyState, speeds: RotorSpeeds, terrain: Terrain | None, params: VehicleParams,
         env: Environment, dt: float, integrator: str = "rk4") -> RigidBodyState:
    """One integration step under fixed rotor speeds.

    The shell (8-rotor vehicle) is in contact when its centre is within one
    shell radius of ``terrain``; pass ``terrain=None`` for free flight.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    plant = _Plant(params, env)
    y = state.to_vector().tolist() + [0.0, 0.0, 0.0]
    contact = None
    if terrain is not None and params.rotor_count == 8:
        feature = _contact_feature(terrain, y, plant.l)
        if feature.distance - plant.l <= CONTACT_TOL:
            contact = _contact_tuple(feature, y, plant.l)
    wrench = wrench_from_speeds(speeds, params)
    if contact is not None and plant.normal_force(y, wrench.thrust, contact) < 0.0:
        contact = None
    y = plant.advance(y, wrench, contact, dt, integrator)
    if contact is not None:
        y, _ = _project(plant, terrain, y)
    if not _finite(y):
        raise SimError("state became non-finite")
    return RigidBodyState.from_vector(np.array(y[:18]))


@dataclass(frozen=True)
class Segment:
    """Setpoint held from ``start`` (s) until the next segment.

    ``rolling`` tracks a body pitch rate (``rate``, rad/s); ``flying`` tracks
    an along-track speed (``speed``, m/s) at ``clearance`` above the ground;
    ``passive`` leaves every rotor off.
    """

    start: float
    mode: str
    rate: float = 0.0
    speed: float = 0.0

    def __post_init__(self):
        if self.mode not in SEGMENT_MODES:
            raise ValueError(f"segment mode must be one of {SEGMENT_MODES}")


@dataclass(frozen=True, eq=False)
class SimSetup:
    """Resolved simulation inputs (SI units, radians)."""

    params: VehicleParams
    env: Environment
    eff: EfficiencyChain
    terrain: Terrain
    segments: tuple[Segment, ...]
    dt: float = 1e-3
    duration: float = 10.0
    integrator: str = "rk4"
    log_every: int = 1
    initial_x: float = 0.0
    initial_speed: float = 0.0
    clearance: float = 1.0
    controller: RateControllerState = field(default_factory=RateControllerState)
    flight_gains: FlightGains = field(default_factory=FlightGains)
    rate_noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.dt <= 0.01:
            raise ValueError("dt must be in (0, 0.01] s")
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.integrator not in INTEGRATORS:
            raise ValueError(f"integrator must be one of {INTEGRATORS}")
        if not self.segments:
            raise ValueError("at least one setpoint segment is required")
        if self.log_every < 1:
            raise ValueError("log_every must be at least 1")


@dataclass(frozen=True, eq=False)
class SimLog:
    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    pitch: np.ndarray
    body_rates: np.ndarray
    thrust: np.ndarray
    torque: np.ndarray
    rotor_speeds: np.ndarray
    power: np.ndarray
    energy: np.ndarray
    distance: np.ndarray
    in_contact: np.ndarray
    totals: dict
    initial_state: RigidBodyState
    final_state: RigidBodyState
    params: VehicleParams
    env: Environment
    eff: EfficiencyChain

    def __len__(self) -> int:
        return self.time.size

    def mean_power(self, settle: float = 0.0, *, whole_revolutions: bool | None = None) -> float:
        """Average electrical power from ``settle`` to the end of the run.

        For a rolling shell the window is trimmed to a whole number of
        revolutions (by distance rolled) so the phase-dependent part of the
        rotor power averages out; pass ``whole_revolutions=False`` to skip.
        """
        t, E, s = self.time, self.energy, self.distance
        i0 = int(np.searchsorted(t, settle))
        if i0 >= t.size - 1:
            raise ValueError("settle time leaves no samples to average")
        if whole_revolutions is None:
            whole_revolutions = bool(self.in_contact[i0:].all()) and self.params.rotor_count == 8
        t0 = t[i0]
        if whole_revolutions:
            lap = 2.0 * math.pi * self.params.shell_radius
            laps = math.floor((s[-1] - s[i0]) / lap)
            if laps >= 1:
                t0 = float(np.interp(s[-1] - laps * lap, s[i0:], t[i0:]))
        E0 = float(np.interp(t0, t, E))
        return (float(E[-1]) - E0) / (float(t[-1]) - t0)

    def to_csv(self, path) -> None:
        n = np.zeros((self.time.size, 8))
        n[:, : self.rotor_speeds.shape[1]] = self.rotor_speeds
        table = np.column_stack([
            self.time, self.position, self.velocity, self.pitch, self.body_rates, self.thrust,
            self.torque, n, self.power, self.energy, self.distance, self.in_contact.astype(float),
        ])
        fmt = ["%.6f"] + ["%.10g"] * (len(CSV_COLUMNS) - 2) + ["%d"]
        np.savetxt(path, table, delimiter=",", header=",".join(CSV_COLUMNS), comments="", fmt=fmt)


def _initial_state(setup: SimSetup, plant: _Plant) -> list:
    terrain, l = setup.terrain, plant.l
    x0 = setup.initial_x
    slope = terrain.slope_at(x0)
    tx, tz = math.cos(slope), math.sin(slope)
    v = setup.initial_speed
    R = np.eye(3).ravel().tolist()
    first = setup.segments[0]
    if setup.params.rotor_count == 8 and first.mode != "flying":
        nx, nz = -math.sin(slope), math.cos(slope)
        z = terrain.height(x0)
        pos = [x0 + l * nx, 0.0, z + l * nz]
        return pos + [v * tx, 0.0, v * tz] + R + [0.0, v / l, 0.0] + [0.0, 0.0, 0.0]
    pos = [x0, 0.0, terrain.height(x0) + setup.clearance]
    return pos + [v * tx, 0.0, v * tz] + R + [0.0, 0.0, 0.0] + [0.0, 0.0, 0.0]


def run(setup: SimSetup) -> SimLog:
    """Simulate ``setup`` and return the decimated log with energy totals."""
    params, env, eff, terrain = setup.params, setup.env.with_(rolling_resistance=setup.terrain.rolling_resistance), setup.eff, setup.terrain
    plant = _Plant(params, env)
    power_of = _RotorPower(params, env, eff)
    l, dt = plant.l, setup.dt
    shell = params.rotor_count == 8
    rng = np.random.default_rng(setup.seed)
    ctl = setup.controller
    n_steps = int(round(setup.duration / dt))
    if n_steps < 1:
        raise ValueError("duration shorter than one step")
    segments = sorted(setup.segments, key=lambda s: s.start)
    starts = [s.start for s in segments]

    y = _initial_state(setup, plant)
    in_contact = shell and segments[0].mode != "flying"
    if in_contact:
        y, _ = _project(plant, terrain, y)
    y0 = list(y)
    energy = distance = contact_loss = 0.0
    zero_speeds = RotorSpeeds(np.zeros(params.rotor_count))
    rows = {k: [] for k in ("t", "y", "wrench", "speeds", "power", "energy", "distance", "contact")}

    def record(t, y, wrench, speeds, p):
        rows["t"].append(t)
        rows["y"].append(y[:18])
        rows["wrench"].append([wrench.thrust, *np.asarray(wrench.torque, dtype=float).tolist()])
        rows["speeds"].append(speeds.speeds)
        rows["power"].append(p)
        rows["energy"].append(energy)
        rows["distance"].append(distance)
        rows["contact"].append(in_contact)

    seg_index = 0
    for k in range(n_steps):
        t = k * dt
        while seg_index + 1 < len(segments) and t >= starts[seg_index + 1] - 1e-12:
            seg_index += 1
        seg = segments[seg_index]
        try:
            if seg.mode == "passive":
                speeds = zero_speeds
            elif seg.mode == "rolling":
                w_meas = np.array(y[15:18])
                if setup.rate_noise_std > 0:
                    w_meas = w_meas + rng.normal(0.0, setup.rate_noise_std, 3)
                cmd, ctl = pi_rate_control((0.0, seg.rate, 0.0), w_meas, ctl, dt)
                speeds, _ = rotor_speeds(cmd, params)
            else:
                slope = terrain.slope_at(y[0])
                state = RigidBodyState.from_vector(np.array(y[:18]))
                cmd = flight_velocity_controller(
                    seg.speed * math.cos(slope), state, params, env,
                    altitude_ref=terrain.height(y[0]) + setup.clearance,
                    climb_rate_ref=seg.speed * math.sin(slope), gains=setup.flight_gains,
                )
                speeds, _ = rotor_speeds(cmd, params)
        except (ModelError, ValueError) as exc:
            raise SimError(f"t = {t:.3f} s: {exc}") from exc
        wrench = wrench_from_speeds(speeds, params)
        thrusts = speeds.thrusts(params.k_thrust).tolist()

        contact = None
        if in_contact:
            contact = _contact_tuple(_contact_feature(terrain, y, l), y, l)
            if plant.normal_force(y, wrench.thrust, contact) < 0.0:
                contact, in_contact = None, False
        try:
            p_now = power_of(y, thrusts)
        except InducedVelocityError as exc:
            raise SimError(f"t = {t:.3f} s: {exc}") from exc
        # trapezoidal rule over the per-step power samples
        if k > 0:
            energy += 0.5 * (p_prev + p_now) * dt
        p_prev = p_now
        if k % setup.log_every == 0:
            record(t, y, wrench, speeds, p_now)

        y_new = plant.advance(y, wrench, contact, dt, setup.integrator)
        if shell:
            gap = _contact_feature(terrain, y_new, l).distance - l
            if in_contact or gap < 0.0:
                y_new, loss = _project(plant, terrain, y_new)
                contact_loss += loss
                in_contact = True
        elif terrain.closest(y_new[0], y_new[2], 1.0).distance < 0.0:
            raise SimError(f"t = {t + dt:.3f} s: vehicle struck the ground")
        if not _finite(y_new):
            raise SimError(f"t = {t + dt:.3f} s: state became non-finite")
        distance += 0.5 * dt * (math.sqrt(y[3] ** 2 + y[4] ** 2 + y[5] ** 2)
                                + math.sqrt(y_new[3] ** 2 + y_new[4] ** 2 + y_new[5] ** 2))
        y = y_new

    try:
        p_now = power_of(y, thrusts)
    except InducedVelocityError as exc:
        raise SimError(f"t = {n_steps * dt:.3f} s: {exc}") from exc
    energy += 0.5 * (p_prev + p_now) * dt
    record(n_steps * dt, y, wrench, speeds, p_now)
    ys = np.array(rows["y"])
    wr = np.array(rows["wrench"])
    totals = {
        "electrical_energy_J": energy,
        "actuator_work_J": y[WORK],
        "drag_dissipation_J": y[DRAG],
        "rolling_dissipation_J": y[ROLLING],
        "contact_loss_J": contact_loss,
        "distance_m": distance,
        "efficiency_total": eff.total,
    }
    return SimLog(
        time=np.array(rows["t"]), position=ys[:, 0:3], velocity=ys[:, 3:6],
        pitch=np.arctan2(ys[:, 8], ys[:, 14]), body_rates=ys[:, 15:18],
        thrust=wr[:, 0], torque=wr[:, 1:4], rotor_speeds=np.array(rows["speeds"]),
        power=np.array(rows["power"]), energy=np.array(rows["energy"]),
        distance=np.array(rows["distance"]), in_contact=np.array(rows["contact"], dtype=bool),
        totals=totals,
        initial_state=RigidBodyState.from_vector(np.array(y0[:18])),
        final_state=RigidBodyState.from_vector(np.array(y[:18])),
        params=params, env=env, eff=eff,
    )


@dataclass(frozen=True)
class EnergyAudit:
    """Mechanical energy balance of a run.

    ``residual = actuator_work - (kinetic_delta + potential_delta + drag +
    rolling + contact_loss)``. ``closure`` is ``|residual| / scale`` with
    ``scale = max(|initial mechanical energy|, energy throughput)``: the
    initial kinetic plus potential energy (datum z = 0), or the sum of the
    magnitudes of actuator work and every loss, whichever is larger.
    ``rotor_aero_input`` is the aerodynamic (induced plus profile-free)
    power integral, i.e. electrical energy times the efficiency chain.
    """

    kinetic_delta: float
    potential_delta: float
    drag_dissipation: float
    rolling_dissipation: float
    contact_loss: float
    actuator_work: float
    rotor_aero_input: float
    electrical_energy: float
    residual: float
    scale: float
    closure: float

    def to_dict(self) -> dict:
        return {k + ("" if k == "closure" else "_J"): v for k, v in self.__dict__.items()}


def energy_audit(log: SimLog, params: VehicleParams | None = None, env: Environment | None = None) -> EnergyAudit:
    if len(log) == 0:
        raise ValueError("empty log")
    params = log.params if params is None else params
    env = log.env if env is None else env
    plant = _Plant(params, env)
    y0 = log.initial_state.to_vector().tolist() + [0.0] * 3
    y1 = log.final_state.to_vector().tolist() + [0.0] * 3
    k0, p0 = plant.mechanical_energy(y0)
    k1, p1 = plant.mechanical_energy(y1)
    tot = log.totals
    work, drag, roll, contact = (tot["actuator_work_J"], tot["drag_dissipation_J"],
                                 tot["rolling_dissipation_J"], tot["contact_loss_J"])
    residual = work - ((k1 - k0) + (p1 - p0) + drag + roll + contact)
    scale = max(abs(k0 + p0), abs(work) + abs(drag) + abs(roll) + abs(contact))
    return EnergyAudit(
        kinetic_delta=k1 - k0, potential_delta=p1 - p0, drag_dissipation=drag,
        rolling_dissipation=roll, contact_loss=contact, actuator_work=work,
        rotor_aero_input=tot["electrical_energy_J"] * tot["efficiency_total"],
        electrical_energy=tot["electrical_energy_J"], residual=residual, scale=scale,
        closure=abs(residual) / scale if scale > 0 else 0.0,
    )
