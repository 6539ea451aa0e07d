"""Rotor power from momentum theory, and vehicle power for flying and rolling.

Angle-of-attack convention (used everywhere in this module): ``alpha`` is the
angle between the rotor disk plane and the freestream, positive when the
freestream crosses the disk *against* the induced flow (descent-like). The
net flow through the disk is then ``nu_i - v_inf * sin(alpha)``, which is the
quantity that multiplies thrust in the power law. A rotor tilted forward into
the flight direction therefore sees a negative alpha and pays extra power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import EfficiencyChain, Environment, VehicleParams, rotation_about_y, rotor_layout

MAX_ITERATIONS = 200
RESIDUAL_TOL = 1e-12
PHASE_SAMPLES = 72


class InducedVelocityError(RuntimeError):
    pass


@dataclass(frozen=True)
class RotorOperatingPoint:
    thrust: float
    freestream: float
    alpha: float
    induced: float

    def __post_init__(self):
        if self.thrust < 0 or self.freestream < 0:
            raise ValueError("thrust and freestream speed must be non-negative")


def _scalar_or_array(x: np.ndarray, scalar: bool):
    return float(x) if scalar else x


def hover_induced_velocity(thrust, air_density: float, disk_radius: float):
    """``sqrt(f / (2 rho pi r^2))``; accepts scalars or arrays."""
    f = np.asarray(thrust, dtype=float)
    vh = np.sqrt(np.maximum(f, 0.0) / (2.0 * air_density * math.pi * disk_radius**2))
    return _scalar_or_array(vh, f.ndim == 0)


def glauert_residual(induced, thrust, freestream, alpha, air_density: float, disk_radius: float):
    """``nu_i - nu_h^2 / sqrt((V cos a)^2 + (nu_i - V sin a)^2)``."""
    nu = np.asarray(induced, dtype=float)
    vh2 = np.asarray(hover_induced_velocity(thrust, air_density, disk_radius)) ** 2
    V = np.asarray(freestream, dtype=float)
    a = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        res = nu - vh2 / np.hypot(V * np.cos(a), nu - V * np.sin(a))
    res = np.where(vh2 == 0.0, nu, res)
    return _scalar_or_array(res, res.ndim == 0)


def _induced_scalar(f: float, V: float, a: float, air_density: float, disk_radius: float, guess: float | None = None) -> float:
    vh2 = max(f, 0.0) / (2.0 * air_density * math.pi * disk_radius * disk_radius)
    if vh2 == 0.0:
        return 0.0
    par = V * math.cos(a)
    through = V * math.sin(a)
    base = max(through, 0.0)
    lo, hi = 0.0, base + math.sqrt(vh2)
    if through > 0:
        d = math.hypot(par, 0.0)
        if d > 0 and base - vh2 / d >= 0:
            hi = base
        else:
            lo = base
    nu = guess if guess is not None and lo < guess < hi else hi
    for _ in range(MAX_ITERATIONS):
        u = nu - through
        d = math.hypot(par, u)
        r = nu - vh2 / d if d > 0 else -math.inf
        if abs(r) <= RESIDUAL_TOL:
            return nu
        if r < 0:
            lo = nu
        else:
            hi = nu
        slope = 1.0 + vh2 * u / d**3 if d > 0 else 0.0
        step = nu - r / slope if slope > 0 else lo - 1.0
        nu = step if lo < step < hi else 0.5 * (lo + hi)
    raise InducedVelocityError(
        f"induced velocity did not converge after {MAX_ITERATIONS} iterations "
        f"(thrust={f:.6g} N, freestream={V:.6g} m/s, alpha={a:.6g} rad)"
    )


def induced_velocity(thrust, freestream, alpha, air_density: float, disk_radius: float):
    """Solve the Glauert relation for the induced velocity.

    Safeguarded Newton iteration inside a sign-changing bracket: whenever a
    Newton step would leave the bracket a bisection step is taken instead.
    When two roots exist (deep descent) the one continuous with the
    high-speed branch is returned. Broadcasts over array inputs; scalar
    inputs take a plain-float path that is much cheaper per call.
    """
    if all(np.ndim(x) == 0 for x in (thrust, freestream, alpha)):
        return _induced_scalar(float(thrust), float(freestream), float(alpha), air_density, disk_radius)
    f, V, a = np.broadcast_arrays(
        np.asarray(thrust, dtype=float), np.asarray(freestream, dtype=float), np.asarray(alpha, dtype=float)
    )
    shape, scalar = f.shape, f.ndim == 0
    f, V, a = np.atleast_1d(f).ravel(), np.atleast_1d(V).ravel(), np.atleast_1d(a).ravel()
    vh2 = np.maximum(f, 0.0) / (2.0 * air_density * math.pi * disk_radius**2)
    vh = np.sqrt(vh2)
    par = V * np.cos(a)
    through = V * np.sin(a)

    def residual(nu):
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.hypot(par, nu - through)
            return nu - vh2 / d, d

    base = np.maximum(through, 0.0)
    hi = base + vh
    lo = np.zeros_like(hi)
    # With a positive through-flow offset the root may lie below it.
    r_base, _ = residual(base)
    below = (through > 0) & (r_base >= 0)
    hi = np.where(below, base, hi)
    lo = np.where(below | (through <= 0), 0.0, base)

    nu = hi.copy()
    done = vh2 == 0.0
    nu[done] = 0.0
    for _ in range(MAX_ITERATIONS):
        r, d = residual(nu)
        conv = done | (np.abs(r) <= RESIDUAL_TOL)
        if conv.all():
            break
        neg = r < 0
        lo = np.where(neg, nu, lo)
        hi = np.where(neg, hi, nu)
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = 1.0 + vh2 * (nu - through) / d**3
            step = nu - r / slope
        bad = ~np.isfinite(step) | (step <= lo) | (step >= hi) | (slope <= 0)
        nxt = np.where(bad, 0.5 * (lo + hi), step)
        nu = np.where(conv, nu, nxt)
        done = conv
    else:
        r, _ = residual(nu)
        bad = ~(done | (np.abs(r) <= RESIDUAL_TOL))
        if bad.any():
            i = int(np.flatnonzero(bad)[0])
            raise InducedVelocityError(
                f"induced velocity did not converge after {MAX_ITERATIONS} iterations "
                f"(thrust={f[i]:.6g} N, freestream={V[i]:.6g} m/s, alpha={a[i]:.6g} rad)"
            )
    return float(nu[0]) if scalar else nu.reshape(shape)


def operating_point(thrust: float, freestream: float, alpha: float, air_density: float, disk_radius: float) -> RotorOperatingPoint:
    nu = induced_velocity(thrust, freestream, alpha, air_density, disk_radius)
    return RotorOperatingPoint(float(thrust), float(freestream), float(alpha), float(nu))


def rotor_power(op: RotorOperatingPoint, eff: EfficiencyChain) -> float:
    """Electrical power of one rotor, clamped at zero (no regeneration)."""
    p = op.thrust * (op.induced - op.freestream * math.sin(op.alpha)) / eff.total
    return max(p, 0.0)


def rotor_power_array(thrust, freestream, alpha, air_density: float, disk_radius: float, eta: float) -> np.ndarray:
    """Vectorised ``rotor_power`` over arrays of operating conditions."""
    f = np.asarray(thrust, dtype=float)
    nu = induced_velocity(f, freestream, alpha, air_density, disk_radius)
    p = f * (nu - np.asarray(freestream) * np.sin(alpha)) / eta
    return np.maximum(p, 0.0)


def vehicle_power_flying(
    speed: float,
    alpha: float,
    rotor_thrusts,
    params: VehicleParams,
    env: Environment,
    eff: EfficiencyChain,
) -> float:
    """Sum of rotor powers when every rotor sees the vehicle airspeed and a shared alpha."""
    thrusts = np.asarray(rotor_thrusts, dtype=float)
    if thrusts.shape != (params.rotor_count,):
        raise ValueError(f"expected {params.rotor_count} rotor thrusts, got shape {thrusts.shape}")
    p = rotor_power_array(thrusts, speed, alpha, env.air_density, params.disk_radius, eff.total)
    return float(np.sum(p))


def rolling_rotor_kinematics(
    speeds, params: VehicleParams, *, driving: bool = True, samples: int = PHASE_SAMPLES,
    phase_offset: float = 0.0, local_airflow: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Airspeed and alpha of the four active rotors over one shell revolution.

    Returns arrays of shape ``(len(speeds), samples, 4)``. The shell rolls along
    +x without slipping, so its spin is ``v / l`` about +y. ``driving`` selects
    the rotor set that produces a positive (forward) pitch torque.
    """
    if params.rotor_count != 8:
        raise ValueError("rolling requires the docked 8-rotor vehicle")
    v = np.atleast_1d(np.asarray(speeds, dtype=float))
    pos, dirs, _ = rotor_layout(params)
    # Positive pitch torque needs f_A, f_B < 0 and f_C, f_D > 0.
    active = [4, 5, 2, 3] if driving else [0, 1, 6, 7]
    pos, dirs = pos[active], dirs[active]
    phases = phase_offset + 2.0 * math.pi * np.arange(samples) / samples
    Rs = np.stack([rotation_about_y(p) for p in phases])
    p_in = np.einsum("kij,rj->kri", Rs, pos)
    d_in = np.einsum("kij,rj->kri", Rs, dirs)
    omega = v / params.shell_radius
    # omega * y_hat x p = omega * (p_z, 0, -p_x)
    vel = np.zeros((v.size, samples, 4, 3))
    vel[..., 0] = v[:, None, None]
    if local_airflow:
        vel[..., 0] += omega[:, None, None] * p_in[None, :, :, 2]
        vel[..., 2] -= omega[:, None, None] * p_in[None, :, :, 0]
    airspeed = np.linalg.norm(vel, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = -np.einsum("vkri,kri->vkr", vel, d_in) / airspeed
    alpha = np.arcsin(np.clip(np.nan_to_num(s), -1.0, 1.0))
    return airspeed, alpha


def vehicle_power_rolling_phase_averaged(
    speed: float,
    pair_force: float,
    params: VehicleParams,
    env: Environment,
    eff: EfficiencyChain,
    *,
    samples: int = PHASE_SAMPLES,
    phase_offset: float = 0.0,
    local_airflow: bool = True,
) -> float:
    """Rotor power averaged over a revolution for a rolling shell.

    ``pair_force`` is the per-pair force magnitude with the sign of the pitch
    torque it produces (negative for braking). Each of the four active rotors
    sees its own airspeed (rolling speed plus its spin about the axle) unless
    ``local_airflow`` is False, in which case every rotor sees ``speed``.
    """
    return float(
        rolling_power_array(
            np.array([speed]), np.array([pair_force]), params, env.air_density, eff.total,
            samples=samples, phase_offset=phase_offset, local_airflow=local_airflow,
        )[0]
    )


def rolling_power_array(
    speeds, pair_forces, params: VehicleParams, air_density: float, eta: float, *,
    samples: int = PHASE_SAMPLES, phase_offset: float = 0.0, local_airflow: bool = True,
) -> np.ndarray:
    v = np.atleast_1d(np.asarray(speeds, dtype=float))
    fp = np.broadcast_to(np.asarray(pair_forces, dtype=float), v.shape)
    out = np.zeros(v.shape)
    for driving in (True, False):
        sel = (fp > 0) if driving else (fp < 0)
        if not sel.any():
            continue
        airspeed, alpha = rolling_rotor_kinematics(
            v[sel], params, driving=driving, samples=samples,
            phase_offset=phase_offset, local_airflow=local_airflow,
        )
        if not local_airflow:
            airspeed = np.broadcast_to(v[sel][:, None, None], airspeed.shape)
        thrust = np.broadcast_to(np.abs(fp[sel])[:, None, None], airspeed.shape)
        p = rotor_power_array(thrust, airspeed, alpha, air_density, params.disk_radius, eta)
        out[sel] = p.sum(axis=2).mean(axis=1)
    return out
