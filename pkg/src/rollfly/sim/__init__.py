"""Time-domain simulation: terrain, closed-loop integration and energy audit."""

from .config import ConfigError, SimConfig, analytic_power, load_config, parse_config, resolve
from .engine import (
    CSV_COLUMNS,
    EnergyAudit,
    Segment,
    SimError,
    SimLog,
    SimSetup,
    energy_audit,
    run,
    step,
)
from .terrain import Terrain, TerrainError, flat, heightmap, load_terrain, profile

__all__ = [
    "CSV_COLUMNS", "ConfigError", "EnergyAudit", "Segment", "SimConfig", "SimError", "SimLog", "SimSetup",
    "Terrain", "TerrainError", "analytic_power", "energy_audit", "flat", "heightmap", "load_config",
    "load_terrain", "parse_config", "profile", "resolve", "run", "step",
]
