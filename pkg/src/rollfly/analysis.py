"""Steady-state energy analysis: power, range and optimal speed for each mode.

Rolling: a pure pitch torque from four rotors balances gravity along the
slope, drag and rolling resistance. Flying: thrust tilts forward until its
horizontal part cancels drag while holding height above the slope. Range on
one battery is ``v * E_batt / P``; sweeping speed gives the range curve, and
sweeping slope and rolling resistance gives the rolling-minus-flying
advantage map with its zero crossing.

Everything is vectorized over speed so a coarse grid is one numpy pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import elementwise, minimize_scalar

from .core import EfficiencyChain, Environment, ModelError, VehicleParams, preset
from .dynamics import mean_rolling_area
from .power import rolling_power_array, rotor_power_array

MODES = ("rolling", "flying")
MAX_TILT = math.radians(60.0)
GRID_MIN_SPEED = 0.01
GRID_MAX_SPEED = 20.0
GRID_SAMPLES = 200
SPEED_TOL = 1e-4

# Reference optima (speed m/s, range m) on flat ground with C_rr = 0.01,
# used as calibration targets for the rotor disk radius.
REFERENCE_OPTIMA = {"rolling": (0.14, 267e3), "flying": (1.7, 135e3)}
CALIBRATION_BOUNDS = (0.05, 0.10)


class InfeasibleError(ModelError):
    """No operating point in the requested regime satisfies the model limits."""


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    """One steady operating point.

    ``pitch`` is the flight tilt; a rolling shell spins through every pitch so
    it is reported as 0. ``torque`` is the signed rolling torque (negative
    when braking downhill) and ``thrust`` the collective flight thrust; the
    unused one is 0.
    """

    mode: str
    speed: float
    pitch: float
    torque: float
    thrust: float
    rotor_thrusts: np.ndarray
    power: float
    range: float
    feasible: bool = True
    reason: str = ""


def _range(speed, power, feasible):
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(power > 0, speed / np.where(power > 0, power, 1.0), np.where(speed > 0, np.inf, 0.0))
    return np.where(feasible, r, np.nan)


def rolling_arrays(speeds, slope: float, crr: float, params: VehicleParams, env: Environment,
                   eff: EfficiencyChain, *, local_airflow: bool = True) -> dict:
    """Vectorized rolling balance; returns torque, pair force, power, range, feasibility."""
    if params.rotor_count != 8:
        raise ValueError("rolling analysis needs the docked 8-rotor vehicle")
    v = np.atleast_1d(np.asarray(speeds, dtype=float))
    weight = params.mass * env.gravity
    drag = 0.5 * env.drag_coefficient * env.air_density * mean_rolling_area(params) * v**2
    force = weight * math.sin(slope) + drag + np.sign(v) * crr * weight * math.cos(slope)
    torque = force * params.shell_radius
    pair = torque / (4.0 * params.pair_offset)
    feasible = np.abs(pair) <= params.max_rotor_thrust
    power = rolling_power_array(v, pair, params, env.air_density, eff.total, local_airflow=local_airflow)
    return {
        "speed": v, "torque": torque, "pair_force": pair, "power": power, "feasible": feasible,
        "range": _range(v, power, feasible) * params.battery_energy,
    }


def flying_arrays(speeds, slope: float, params: VehicleParams, env: Environment, eff: EfficiencyChain) -> dict:
    """Vectorized flight balance along a slope at constant height above it."""
    v = np.atleast_1d(np.asarray(speeds, dtype=float))
    weight = params.mass * env.gravity
    q = 0.5 * env.drag_coefficient * env.air_density * params.shell_width * v**2
    h2, l2 = params.rotor_height, 2.0 * params.shell_radius
    cs, sn = math.cos(slope), math.sin(slope)

    def drag(t, q):
        return q * (h2 * np.cos(t) + l2 * np.sin(t))

    def residual(t, q):
        d = drag(t, q)
        return t - np.arctan2(d * cs, weight + d * sn)

    tilt = np.zeros_like(v)
    feasible = residual(np.full_like(v, MAX_TILT), q) >= 0
    solve = feasible & (q > 0)
    if solve.any():
        qs = q[solve]
        res = elementwise.find_root(
            residual, (np.zeros(qs.shape), np.full(qs.shape, MAX_TILT)), args=(qs,),
            tolerances=dict(xatol=1e-15, xrtol=4e-16, fatol=0.0, frtol=0.0),
        )
        tilt[solve] = res.x
    d = drag(tilt, q)
    thrust = np.hypot(d * cs, weight + d * sn)
    n = params.rotor_count
    alpha = -(tilt + slope)
    per_rotor = thrust / n
    power = n * rotor_power_array(per_rotor, v, alpha, env.air_density, params.disk_radius, eff.total)
    return {
        "speed": v, "tilt": tilt, "thrust": thrust, "drag": d, "power": power, "feasible": feasible,
        "range": _range(v, power, feasible) * params.battery_energy,
    }


def rolling_steady_state(speed: float, slope: float, crr: float, params: VehicleParams, env: Environment,
                         eff: EfficiencyChain, *, local_airflow: bool = True) -> SteadyStateResult:
    if speed < 0:
        raise ValueError("speed must be non-negative")
    a = rolling_arrays([speed], slope, crr, params, env, eff, local_airflow=local_airflow)
    pair = float(a["pair_force"][0])
    feasible = bool(a["feasible"][0])
    power = float(a["power"][0])
    return SteadyStateResult(
        mode="rolling", speed=speed, pitch=0.0, torque=float(a["torque"][0]), thrust=0.0,
        rotor_thrusts=np.full(4, abs(pair)), power=power,
        range=speed * params.battery_energy / power if power > 0 else (math.inf if speed > 0 else 0.0),
        feasible=feasible,
        reason="" if feasible else f"pair force {abs(pair):.3g} N exceeds rotor limit {params.max_rotor_thrust:g} N",
    )


def flying_steady_state(speed: float, slope: float, params: VehicleParams, env: Environment,
                        eff: EfficiencyChain) -> SteadyStateResult:
    if speed < 0:
        raise ValueError("speed must be non-negative")
    a = flying_arrays([speed], slope, params, env, eff)
    feasible = bool(a["feasible"][0])
    thrust = float(a["thrust"][0])
    power = float(a["power"][0])
    return SteadyStateResult(
        mode="flying", speed=speed, pitch=float(a["tilt"][0]), torque=0.0, thrust=thrust,
        rotor_thrusts=np.full(params.rotor_count, thrust / params.rotor_count), power=power,
        range=speed * params.battery_energy / power if power > 0 else (math.inf if speed > 0 else 0.0),
        feasible=feasible, reason="" if feasible else "no tilt solution below 60 deg",
    )


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def range_array(mode: str, speeds, slope: float, crr: float, params: VehicleParams, env: Environment,
                eff: EfficiencyChain, **options) -> np.ndarray:
    """Range in metres for each speed; NaN where infeasible."""
    _check_mode(mode)
    if mode == "rolling":
        return rolling_arrays(speeds, slope, crr, params, env, eff, **options)["range"]
    return flying_arrays(speeds, slope, params, env, eff)["range"]


def speed_grid(v_min: float = GRID_MIN_SPEED, v_max: float = GRID_MAX_SPEED, samples: int = GRID_SAMPLES) -> np.ndarray:
    return np.logspace(math.log10(v_min), math.log10(v_max), samples)


def optimal_velocity(mode: str, slope: float, crr: float, params: VehicleParams, env: Environment,
                     eff: EfficiencyChain, *, grid: np.ndarray | None = None, tol: float = SPEED_TOL,
                     **options) -> tuple[float, float]:
    """Range-maximizing speed: log-spaced grid scan, then golden-section refinement.

    Returns ``(v_star, R_star)`` in m/s and m. Raises ``InfeasibleError`` when
    no grid speed is feasible.
    """
    grid = speed_grid() if grid is None else np.asarray(grid, dtype=float)
    R = range_array(mode, grid, slope, crr, params, env, eff, **options)
    if not np.any(np.isfinite(R)):
        if np.any(np.isposinf(R)):
            i = int(np.argmax(np.isposinf(R)))
            return float(grid[i]), math.inf
        raise InfeasibleError(f"{mode}: no feasible speed in [{grid[0]:g}, {grid[-1]:g}] m/s "
                              f"at slope {math.degrees(slope):.3g} deg, C_rr {crr:g}")
    score = np.where(np.isnan(R), -np.inf, R)
    i = int(np.argmax(score))
    best_v, best_R = float(grid[i]), float(score[i])
    if 0 < i < grid.size - 1 and math.isfinite(best_R):
        def neg_range(v):
            r = range_array(mode, [v], slope, crr, params, env, eff, **options)[0]
            return -r if np.isfinite(r) else math.inf

        a, c = float(grid[i - 1]), float(grid[i + 1])
        res = minimize_scalar(neg_range, bracket=(a, best_v, c), method="golden",
                              options={"xtol": tol / (2.0 * c)})
        if a <= res.x <= c and -res.fun >= best_R:
            best_v, best_R = float(res.x), float(-res.fun)
    return best_v, best_R


@dataclass(frozen=True, eq=False)
class RangeCurve:
    mode: str
    slope: float
    crr: float
    speeds: np.ndarray
    powers: np.ndarray
    ranges: np.ndarray
    feasible: np.ndarray
    optimum_speed: float
    optimum_range: float


def range_curve(mode: str, slope: float, crr: float, speeds, params: VehicleParams, env: Environment,
                eff: EfficiencyChain, **options) -> RangeCurve:
    """Power and range at each requested speed, plus the refined optimum.

    Raises ``InfeasibleError`` when none of the requested speeds is feasible.
    """
    _check_mode(mode)
    v = np.asarray(speeds, dtype=float)
    if v.size == 0 or np.any(v <= 0):
        raise ValueError("speed grid must be nonempty and positive")
    if mode == "rolling":
        a = rolling_arrays(v, slope, crr, params, env, eff, **options)
    else:
        a = flying_arrays(v, slope, params, env, eff)
    if not a["feasible"].any():
        raise InfeasibleError(f"{mode}: every requested speed in [{v.min():g}, {v.max():g}] m/s is infeasible "
                              f"at slope {math.degrees(slope):.3g} deg, C_rr {crr:g}")
    v_star, R_star = optimal_velocity(mode, slope, crr, params, env, eff, **options)
    finite = np.where(np.isnan(a["range"]), -np.inf, a["range"])
    j = int(np.argmax(finite))
    if finite[j] > R_star:
        v_star, R_star = float(v[j]), float(finite[j])
    return RangeCurve(mode, slope, crr, v, a["power"], a["range"], a["feasible"], v_star, R_star)


@dataclass(frozen=True, eq=False)
class AdvantageGrid:
    """Range difference (rolling minus flying) indexed ``[slope, crr]``."""

    slopes: np.ndarray
    crrs: np.ndarray
    delta: np.ndarray
    rolling_range: np.ndarray
    flying_range: np.ndarray
    rolling_speed: np.ndarray
    flying_speed: np.ndarray
    crossover: list = field(default_factory=list)


def crossover_points(slopes: np.ndarray, crrs: np.ndarray, delta: np.ndarray) -> list[tuple[float, float]]:
    """Zero crossings of ``delta`` along C_rr at each slope, by linear interpolation."""
    points = []
    for i, s in enumerate(slopes):
        col = delta[i]
        for j in range(len(crrs) - 1):
            a, b = col[j], col[j + 1]
            if not (np.isfinite(a) and np.isfinite(b)):
                continue
            if a == 0.0:
                points.append((float(s), float(crrs[j])))
            elif a * b < 0:
                points.append((float(s), float(crrs[j] + (crrs[j + 1] - crrs[j]) * a / (a - b))))
        if len(crrs) > 1 and col[-1] == 0.0:
            points.append((float(s), float(crrs[-1])))
    return points


def advantage_map(slopes, crrs, roll: VehicleParams, fly: VehicleParams, env: Environment,
                  eff: EfficiencyChain, **options) -> AdvantageGrid:
    """Rolling-minus-flying optimal range over a slope x rolling-resistance grid.

    Every cell uses its own optimal speeds. The flying optimum does not
    depend on rolling resistance, so it is computed once per slope.
    """
    slopes = np.atleast_1d(np.asarray(slopes, dtype=float))
    crrs = np.atleast_1d(np.asarray(crrs, dtype=float))
    shape = (slopes.size, crrs.size)
    R_roll, R_fly = np.full(shape, np.nan), np.full(shape, np.nan)
    v_roll, v_fly = np.full(shape, np.nan), np.full(shape, np.nan)
    for i, s in enumerate(slopes):
        try:
            vf, rf = optimal_velocity("flying", s, 0.0, fly, env, eff)
        except InfeasibleError:
            vf, rf = math.nan, 0.0
        v_fly[i], R_fly[i] = vf, rf
        for j, c in enumerate(crrs):
            try:
                v_roll[i, j], R_roll[i, j] = optimal_velocity("rolling", s, c, roll, env, eff, **options)
            except InfeasibleError:
                R_roll[i, j] = 0.0
    delta = R_roll - R_fly
    return AdvantageGrid(slopes, crrs, delta, R_roll, R_fly, v_roll, v_fly, crossover_points(slopes, crrs, delta))


def coverage_area(one_way_range: float) -> float:
    """Area of the disk reachable out-and-back: ``pi * (range / 2)**2``."""
    if one_way_range < 0:
        raise ValueError("range must be non-negative")
    return math.pi * (one_way_range / 2.0) ** 2


@dataclass(frozen=True)
class Calibration:
    disk_radius: float
    objective: float
    optima: dict
    residuals: dict
    table: list

    def to_dict(self) -> dict:
        return {
            "disk_radius_m": self.disk_radius,
            "objective": self.objective,
            "targets": {k: {"v_mps": v, "range_km": r / 1e3} for k, (v, r) in REFERENCE_OPTIMA.items()},
            "optima": self.optima,
            "log_residuals": self.residuals,
            "scan": self.table,
        }


def _optima_at(radius: float, env: Environment | None, eff: EfficiencyChain | None) -> dict:
    roll, env0, eff0 = preset("titan_table1_roll", disk_radius=radius)
    fly, _, _ = preset("titan_table1_fly", disk_radius=radius)
    env = env0.with_(rolling_resistance=0.01, slope=0.0) if env is None else env
    eff = eff0 if eff is None else eff
    vr, rr = optimal_velocity("rolling", 0.0, 0.01, roll, env, eff)
    vf, rf = optimal_velocity("flying", 0.0, 0.01, fly, env, eff)
    return {"rolling": (vr, rr), "flying": (vf, rf)}


def calibrate_disk_radius(radii=None, env: Environment | None = None, eff: EfficiencyChain | None = None) -> Calibration:
    """Pick the disk radius whose flat-ground optima best match the reference optima.

    The objective is the sum of squared log ratios of the four quantities
    (rolling and flying optimal speed and range), scanned over ``radii``
    (default: 51 points spanning the admissible interval).
    """
    radii = np.linspace(*CALIBRATION_BOUNDS, 51) if radii is None else np.asarray(radii, dtype=float)
    best = None
    table = []
    for r in radii:
        optima = _optima_at(float(r), env, eff)
        res = {}
        for mode, (v, R) in optima.items():
            tv, tR = REFERENCE_OPTIMA[mode]
            res[f"{mode}_speed"] = math.log(v / tv)
            res[f"{mode}_range"] = math.log(R / tR)
        obj = sum(x * x for x in res.values())
        row = {"disk_radius_m": float(r), "objective": obj,
               **{f"{m}_v_mps": o[0] for m, o in optima.items()},
               **{f"{m}_range_km": o[1] / 1e3 for m, o in optima.items()}}
        table.append(row)
        if best is None or obj < best[1]:
            best = (float(r), obj, optima, res)
    r, obj, optima, res = best
    return Calibration(
        disk_radius=r, objective=obj,
        optima={m: {"v_mps": v, "range_km": R / 1e3} for m, (v, R) in optima.items()},
        residuals=res, table=table,
    )
