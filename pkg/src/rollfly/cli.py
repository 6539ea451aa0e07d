"""Command-line front end: analysis tables, simulation runs and run manifests.

Every command writes a manifest (``*.manifest.json``) holding the resolved
inputs, version, timestamp and SHA-256 of each output; ``replay`` re-runs a
manifest and checks the hashes. Angles are degrees on the command line.

Exit codes: 0 success, 2 usage or validation error, 3 infeasible model
regime, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import hashlib
import json
import math
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    InfeasibleError,
    advantage_map,
    calibrate_disk_radius,
    coverage_area,
    range_curve,
    speed_grid,
)
from .core import CALIBRATED_DISK_RADIUS, ModelError, preset, validate

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_IO = 0, 2, 3, 4
MODE_NAMES = {"roll": "rolling", "fly": "flying"}
PRESET_NAMES = {"roll": "titan_table1_roll", "fly": "titan_table1_fly"}


class UsageError(ValueError):
    pass


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_json(path: Path, data) -> None:
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    return "nan" if math.isnan(x) else repr(x)


def _clean(x):
    """JSON-safe value: non-finite floats become strings."""
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, np.integer):
        return int(x)
    return x


def _models(disk_radius: float, crr: float = 0.01):
    roll, env, eff = preset("titan_table1_roll", disk_radius=disk_radius)
    fly, _, _ = preset("titan_table1_fly", disk_radius=disk_radius)
    env = env.with_(rolling_resistance=crr)
    for name, p in (("roll", roll), ("fly", fly)):
        problems = validate(p, env)
        if problems:
            raise UsageError("; ".join(problems))
    return roll, fly, env, eff


def _check_slope(deg: float, flag: str) -> float:
    if not (math.isfinite(deg) and -90.0 < deg < 90.0):
        raise UsageError(f"{flag} must be in (-90, 90) degrees")
    return math.radians(deg)


def _check_crr(crr: float, flag: str = "--crr") -> float:
    if not 0.0 <= crr <= 1.0:
        raise UsageError(f"{flag}: C_rr out of range [0, 1], got {crr:g}")
    return crr


def _manifest(command: str, args: dict, resolved: dict, outputs: list[Path]) -> dict:
    return {
        "command": command,
        "args": args,
        "resolved": _clean(resolved),
        "tool": "rollfly",
        "version": __version__,
        "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "outputs": {p.name: _sha256(p) for p in outputs},
    }


# -- commands ----------------------------------------------------------------

def run_range_curve(args: dict, out: Path) -> tuple[list[Path], dict]:
    mode = MODE_NAMES[args["mode"]]
    slope = _check_slope(args["slope_deg"], "--slope-deg")
    crr = _check_crr(args["crr"])
    if not 0 < args["v_min"] < args["v_max"] or args["samples"] < 2:
        raise UsageError("need 0 < --v-min < --v-max and --samples >= 2")
    roll, fly, env, eff = _models(args["disk_radius"], crr)
    params = roll if mode == "rolling" else fly
    v = speed_grid(args["v_min"], args["v_max"], args["samples"])
    options = {"local_airflow": not args["simplified_airflow"]} if mode == "rolling" else {}
    curve = range_curve(mode, slope, crr, v, params, env, eff, **options)
    out.parent.mkdir(parents=True, exist_ok=True)
    rows = [(s, p if ok else math.nan, r / 1e3)
            for s, p, r, ok in zip(curve.speeds, curve.powers, curve.ranges, curve.feasible)]
    _write_csv(out, ("v_mps", "power_W", "range_km"), rows)
    sidecar = out.with_suffix(".json")
    _write_json(sidecar, _clean({
        "mode": mode, "slope_deg": args["slope_deg"], "crr": crr,
        "v_star_mps": curve.optimum_speed, "range_star_km": curve.optimum_range / 1e3,
        "infeasible_samples": int(np.sum(~curve.feasible)),
    }))
    resolved = {"params": params.to_dict(), "environment": env.to_dict(), "efficiency": eff.to_dict()}
    return [out, sidecar], resolved


def run_advantage_map(args: dict, out: Path) -> tuple[list[Path], dict]:
    s0 = _check_slope(args["slope_min_deg"], "--slope-min-deg")
    s1 = _check_slope(args["slope_max_deg"], "--slope-max-deg")
    c0, c1 = _check_crr(args["crr_min"], "--crr-min"), _check_crr(args["crr_max"], "--crr-max")
    n = args["resolution"]
    if n < 1 or s1 < s0 or c1 < c0:
        raise UsageError("need --resolution >= 1, slope-min <= slope-max and crr-min <= crr-max")
    roll, fly, env, eff = _models(args["disk_radius"])
    slopes = np.linspace(s0, s1, n) if n > 1 else np.array([s0])
    crrs = np.linspace(c0, c1, n) if n > 1 else np.array([c0])
    grid = advantage_map(slopes, crrs, roll, fly, env, eff)
    out.mkdir(parents=True, exist_ok=True)
    cells = out / "advantage_map.csv"
    rows = []
    for i, s in enumerate(slopes):
        for j, c in enumerate(crrs):
            rows.append((math.degrees(s), c, grid.delta[i, j] / 1e3, grid.rolling_range[i, j] / 1e3,
                         grid.flying_range[i, j] / 1e3, grid.rolling_speed[i, j], grid.flying_speed[i, j]))
    _write_csv(cells, ("slope_deg", "crr", "delta_range_km", "rolling_range_km", "flying_range_km",
                       "rolling_v_mps", "flying_v_mps"), rows)
    cross = out / "crossover.csv"
    _write_csv(cross, ("slope_deg", "crr"), [(math.degrees(s), c) for s, c in grid.crossover])
    resolved = {"rolling_params": roll.to_dict(), "flying_params": fly.to_dict(),
                "environment": env.to_dict(), "efficiency": eff.to_dict()}
    return [cells, cross], resolved


def run_simulate(args: dict, out: Path) -> tuple[list[Path], dict]:
    from .sim import ConfigError, analytic_power, energy_audit, parse_config, resolve, run
    from .sim.config import config_to_json

    try:
        cfg = parse_config(args["config_json"])
        setup = resolve(cfg, args["base_dir"])
    except ConfigError as exc:
        raise UsageError(f"config: {exc}") from None
    log = run(setup)
    audit = energy_audit(log)
    out.mkdir(parents=True, exist_ok=True)
    log_path = out / "log.csv"
    log.to_csv(log_path)
    mean = log.mean_power(cfg.settle_s)
    ref = analytic_power(setup)
    report = {
        "energy_audit": audit.to_dict(),
        "mean_power_W": mean,
        "settle_s": cfg.settle_s,
        "distance_m": log.totals["distance_m"],
        "analytic_power_W": ref,
        "relative_error": (mean - ref) / ref if ref else None,
    }
    audit_path = out / "audit.json"
    _write_json(audit_path, _clean(report))
    resolved = {"config": json.loads(config_to_json(cfg)), "params": setup.params.to_dict(),
                "environment": setup.env.to_dict(), "efficiency": setup.eff.to_dict()}
    return [log_path, audit_path], resolved


def run_coverage(args: dict, out: Path | None) -> tuple[list[Path], dict]:
    r = args["range_km"]
    if not (math.isfinite(r) and r >= 0):
        raise UsageError("--range-km must be a non-negative number")
    result = {"range_km": r, "area_km2": coverage_area(r * 1e3) / 1e6}
    print(json.dumps(result, sort_keys=True))
    if out is None:
        return [], {}
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, result)
    return [out], {}


def run_calibrate(args: dict, out: Path) -> tuple[list[Path], dict]:
    lo, hi = args["radius_min"], args["radius_max"]
    if not 0 < lo <= hi or args["steps"] < 1:
        raise UsageError("need 0 < --radius-min <= --radius-max and --steps >= 1")
    radii = np.linspace(lo, hi, args["steps"]) if args["steps"] > 1 else np.array([lo])
    cal = calibrate_disk_radius(radii)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_json(out, _clean(cal.to_dict()))
    print(f"disk radius {cal.disk_radius:.4f} m, objective {cal.objective:.4g}")
    return [out], {}


COMMANDS = {
    "range-curve": run_range_curve,
    "advantage-map": run_advantage_map,
    "simulate": run_simulate,
    "coverage": run_coverage,
    "calibrate": run_calibrate,
}


def _manifest_path(command: str, out: Path) -> Path:
    if command in ("advantage-map", "simulate"):
        return out / "manifest.json"
    return out.with_name(out.stem + ".manifest.json")


def execute(command: str, args: dict, out: Path | None) -> Path | None:
    outputs, resolved = COMMANDS[command](args, out)
    if out is None:
        return None
    path = _manifest_path(command, out)
    _write_json(path, _manifest(command, args, resolved, outputs))
    return path


def replay(manifest_path: Path, out: Path | None) -> bool:
    """Re-run a manifest; return True when every output hash matches."""
    m = json.loads(Path(manifest_path).read_text())
    command, args = m["command"], m["args"]
    if command not in COMMANDS:
        raise UsageError(f"unknown command {command!r} in manifest")
    work = Path(tempfile.mkdtemp(prefix="rollfly-replay-")) if out is None else out
    names = list(m["outputs"])
    if command in ("advantage-map", "simulate"):
        target = work
    else:
        target = work / names[0]
    outputs, _ = COMMANDS[command](args, target)
    fresh = {p.name: _sha256(p) for p in outputs}
    ok = True
    for name, digest in m["outputs"].items():
        same = fresh.get(name) == digest
        ok &= same
        print(f"{'same' if same else 'DIFFERENT'} {name}")
    return ok


# -- argument parsing --------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="rollfly", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"rollfly {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--preset", choices=["titan"], default="titan", help="parameter set (default titan)")
        sp.add_argument("--disk-radius", type=float, default=CALIBRATED_DISK_RADIUS, metavar="M",
                        help=f"rotor disk radius in m (default {CALIBRATED_DISK_RADIUS})")

    rc = sub.add_parser("range-curve", help="range vs speed for one mode and terrain")
    rc.add_argument("--mode", choices=sorted(MODE_NAMES), required=True)
    rc.add_argument("--slope-deg", type=float, default=0.0)
    rc.add_argument("--crr", type=float, default=0.01)
    rc.add_argument("--v-min", type=float, default=0.01)
    rc.add_argument("--v-max", type=float, default=20.0)
    rc.add_argument("--samples", type=int, default=200)
    rc.add_argument("--simplified-airflow", action="store_true",
                    help="rolling rotors all see the rolling speed (no spin contribution)")
    rc.add_argument("--out", type=Path, required=True, help="CSV path; sidecar JSON written beside it")
    common(rc)

    am = sub.add_parser("advantage-map", help="rolling-minus-flying range over slope x C_rr")
    am.add_argument("--slope-min-deg", type=float, default=-0.5)
    am.add_argument("--slope-max-deg", type=float, default=2.0)
    am.add_argument("--crr-min", type=float, default=0.01)
    am.add_argument("--crr-max", type=float, default=0.2)
    am.add_argument("--resolution", type=int, default=25)
    am.add_argument("--out", type=Path, required=True, help="output directory")
    common(am)

    sm = sub.add_parser("simulate", help="run a JSON simulation config")
    sm.add_argument("--config", type=Path, required=True)
    sm.add_argument("--out", type=Path, required=True, help="output directory")

    cv = sub.add_parser("coverage", help="out-and-back coverage area for a range")
    cv.add_argument("--range-km", type=float, required=True)
    cv.add_argument("--out", type=Path, default=None, help="optional JSON output")

    cb = sub.add_parser("calibrate", help="fit the rotor disk radius to the reference optima")
    cb.add_argument("--radius-min", type=float, default=0.05)
    cb.add_argument("--radius-max", type=float, default=0.10)
    cb.add_argument("--steps", type=int, default=51)
    cb.add_argument("--out", type=Path, default=Path("calibration.json"))

    rp = sub.add_parser("replay", help="re-run a manifest and compare output hashes")
    rp.add_argument("manifest", type=Path)
    rp.add_argument("--out", type=Path, default=None, help="directory for regenerated outputs")
    return p


def _args_of(ns: argparse.Namespace) -> dict:
    d = {k: v for k, v in vars(ns).items() if k not in ("command", "out")}
    if ns.command == "simulate":
        cfg_path = Path(d.pop("config"))
        d["config_json"] = cfg_path.read_text()
        d["base_dir"] = str(cfg_path.resolve().parent)
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in d.items()}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        if ns.command == "replay":
            return EXIT_OK if replay(ns.manifest, ns.out) else 1
        execute(ns.command, _args_of(ns), ns.out)
        return EXIT_OK
    except UsageError as exc:
        print(f"rollfly: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, ModelError) as exc:
        print(f"rollfly: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"rollfly: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except RuntimeError as exc:
        # simulation aborts (controller infeasibility, non-finite state)
        print(f"rollfly: infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
