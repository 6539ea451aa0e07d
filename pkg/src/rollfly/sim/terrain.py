"""Terrain along the ground track: a plane, a 1-D profile, or a 2-D heightmap.

The dynamics are planar, so every terrain is reduced to a height profile
``z(x)`` along +x. Heightmaps are sampled along a straight track at fixed
``y`` (bilinear in y, hence piecewise linear in x between grid columns) and
any lateral slope is ignored with a warning.

Contact queries treat the profile as a polyline and return the closest
feature to the shell centre: a face (constant normal) or a vertex (normal
through the vertex, with the centripetal term of pivoting around it).
"""

from __future__ import annotations

import bisect
import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

TERRAIN_KINDS = ("flat", "profile_1d", "heightmap_2d")
REQUIRED_GRID_KEYS = ("ncols", "nrows", "cellsize", "nodata_value")
OPTIONAL_GRID_KEYS = ("xllcorner", "yllcorner")


class TerrainError(ValueError):
    """Malformed terrain file or a query outside the terrain."""


@dataclass(frozen=True)
class ContactFeature:
    """Closest terrain feature to a point: signed distance and unit normal (x, z)."""

    distance: float
    nx: float
    nz: float
    vertex: bool


@dataclass(frozen=True, eq=False)
class Terrain:
    kind: str
    rolling_resistance: float
    slope: float = 0.0
    xs: np.ndarray | None = None
    zs: np.ndarray | None = None
    cellsize: float | None = None
    grid: np.ndarray | None = None
    origin: tuple[float, float] = (0.0, 0.0)
    track_y: float | None = None
    lateral_slope_max: float = 0.0

    def __post_init__(self):
        if self.kind not in TERRAIN_KINDS:
            raise TerrainError(f"unknown terrain kind {self.kind!r}")
        if not 0.0 <= self.rolling_resistance <= 1.0:
            raise TerrainError("C_rr out of range [0, 1]")
        if self.kind == "flat":
            if not -math.pi / 2 < self.slope < math.pi / 2:
                raise TerrainError("slope out of range (-pi/2, pi/2)")
        else:
            xs, zs = np.asarray(self.xs, dtype=float), np.asarray(self.zs, dtype=float)
            if xs.ndim != 1 or xs.shape != zs.shape or xs.size < 2:
                raise TerrainError("profile needs at least two (distance, height) samples")
            if not np.all(np.isfinite(zs)):
                raise TerrainError("heights must be finite")
            if np.any(np.diff(xs) <= 0):
                raise TerrainError("profile distance must be strictly increasing")
            object.__setattr__(self, "xs", xs)
            object.__setattr__(self, "zs", zs)
            # python lists make the per-step contact search cheap
            object.__setattr__(self, "_xl", xs.tolist())
            object.__setattr__(self, "_zl", zs.tolist())
        if self.kind == "flat":
            object.__setattr__(self, "_n", (-math.sin(self.slope), math.cos(self.slope)))

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "flat":
            return (-math.inf, math.inf)
        return (float(self.xs[0]), float(self.xs[-1]))

    def _segment(self, x: float) -> int:
        xl = self._xl
        if not xl[0] <= x <= xl[-1]:
            raise TerrainError(f"x = {x:.3f} m is outside the terrain [{xl[0]:g}, {xl[-1]:g}] m")
        return min(max(bisect.bisect_right(xl, x) - 1, 0), len(xl) - 2)

    def height(self, x: float) -> float:
        if self.kind == "flat":
            return x * math.tan(self.slope)
        i = self._segment(x)
        x0, x1, z0, z1 = self._xl[i], self._xl[i + 1], self._zl[i], self._zl[i + 1]
        return z0 + (z1 - z0) * (x - x0) / (x1 - x0)

    def slope_at(self, x: float) -> float:
        """Slope angle (rad) of the profile at ``x``; rises along +x when positive."""
        if self.kind == "flat":
            return self.slope
        i = self._segment(x)
        return math.atan2(self._zl[i + 1] - self._zl[i], self._xl[i + 1] - self._xl[i])

    def closest(self, x: float, z: float, reach: float) -> ContactFeature:
        """Closest feature to the point ``(x, z)`` among segments within ``reach``.

        ``distance`` is positive above the surface.
        """
        if self.kind == "flat":
            nx, nz = self._n
            return ContactFeature(x * nx + z * nz, nx, nz, False)
        xl, zl = self._xl, self._zl
        if not xl[0] <= x <= xl[-1]:
            raise TerrainError(f"x = {x:.3f} m is outside the terrain [{xl[0]:g}, {xl[-1]:g}] m")
        lo = max(bisect.bisect_left(xl, x - reach) - 1, 0)
        hi = min(bisect.bisect_right(xl, x + reach), len(xl) - 1)
        best = None
        for i in range(lo, hi):
            x0, z0, x1, z1 = xl[i], zl[i], xl[i + 1], zl[i + 1]
            dx, dz = x1 - x0, z1 - z0
            seg2 = dx * dx + dz * dz
            u = ((x - x0) * dx + (z - z0) * dz) / seg2
            if u <= 0.0:
                px, pz, vertex = x0, z0, i > 0
            elif u >= 1.0:
                px, pz, vertex = x1, z1, i + 1 < len(xl) - 1
            else:
                px, pz, vertex = x0 + u * dx, z0 + u * dz, False
            ex, ez = x - px, z - pz
            d = math.hypot(ex, ez)
            if best is None or d < best[0] - 1e-15:
                best = (d, ex, ez, vertex, dx, dz, seg2)
        d, ex, ez, vertex, dx, dz, seg2 = best
        if not vertex or d == 0.0:
            s = math.sqrt(seg2)
            nx, nz = -dz / s, dx / s
            # signed distance to the face line
            return ContactFeature(ex * nx + ez * nz, nx, nz, False)
        below = z < self.height(x)
        sign = -1.0 if below else 1.0
        return ContactFeature(sign * d, sign * ex / d, sign * ez / d, True)


def flat(slope: float = 0.0, rolling_resistance: float = 0.01) -> Terrain:
    return Terrain("flat", rolling_resistance, slope=slope)


def profile(distances, heights, rolling_resistance: float = 0.01) -> Terrain:
    return Terrain("profile_1d", rolling_resistance, xs=np.asarray(distances, float), zs=np.asarray(heights, float))


def heightmap(grid, cellsize: float, rolling_resistance: float = 0.01, *, origin=(0.0, 0.0),
              track_y: float | None = None, nodata_rows: dict | None = None) -> Terrain:
    """Heightmap traversed along +x at ``y = track_y`` (default: middle of the map).

    ``grid`` is row-major with row 0 at the top (largest y), as in ASCII
    grids. Heights are node values: node ``(i, j)`` sits at
    ``x = x0 + j * cellsize``, ``y = y0 + (nrows - 1 - i) * cellsize``.
    ``nodata_rows`` maps row index to source line number for diagnostics;
    NaN entries mark missing cells.
    """
    g = np.asarray(grid, dtype=float)
    if g.ndim != 2 or g.shape[0] < 1 or g.shape[1] < 2:
        raise TerrainError("heightmap needs at least one row and two columns")
    if not cellsize > 0:
        raise TerrainError("cellsize must be positive")
    nrows, ncols = g.shape
    x0, y0 = origin
    y_top = y0 + (nrows - 1) * cellsize
    if track_y is None:
        track_y = y0 + 0.5 * (nrows - 1) * cellsize
    if not y0 <= track_y <= y_top:
        raise TerrainError(f"track_y {track_y:g} m outside the map [{y0:g}, {y_top:g}] m")
    # fractional row measured from the top
    fr = (y_top - track_y) / cellsize
    i0 = min(int(math.floor(fr)), nrows - 1)
    i1 = min(i0 + 1, nrows - 1)
    w = fr - i0
    rows = {i0, i1} if w > 0 else {i0}
    for i in sorted(rows):
        if np.any(np.isnan(g[i])):
            where = f" (line {nodata_rows[i]})" if nodata_rows and i in nodata_rows else ""
            raise TerrainError(f"nodata cell on the ground track in row {i}{where}")
    zs = (1.0 - w) * g[i0] + w * g[i1]
    xs = x0 + cellsize * np.arange(ncols)
    lateral = 0.0
    if nrows > 1:
        ia, ib = (i0, i1) if i1 != i0 else (max(i0 - 1, 0), i0)
        if ia != ib and not (np.any(np.isnan(g[ia])) or np.any(np.isnan(g[ib]))):
            lateral = float(np.max(np.abs(np.arctan((g[ia] - g[ib]) / ((ib - ia) * cellsize)))))
    if lateral > 0.0:
        log.warning("heightmap has lateral slope up to %.2f deg across the track; ignored (planar model)",
                    math.degrees(lateral))
    return Terrain("heightmap_2d", rolling_resistance, xs=xs, zs=zs, cellsize=cellsize, grid=g,
                   origin=(x0, y0), track_y=track_y, lateral_slope_max=lateral)


def _parse_ascii_grid(path: Path):
    header: dict[str, float] = {}
    rows: list[list[float]] = []
    row_lines: dict[int, int] = {}
    with open(path) as fh:
        lines = list(fh)
    lineno = 0
    for lineno, raw in enumerate(lines, start=1):
        parts = raw.split()
        if not parts:
            continue
        key = parts[0].lower()
        if key in REQUIRED_GRID_KEYS + OPTIONAL_GRID_KEYS:
            if rows:
                raise TerrainError(f"{path}:{lineno}: header key {parts[0]!r} after data rows")
            if len(parts) != 2:
                raise TerrainError(f"{path}:{lineno}: header {parts[0]!r} needs exactly one value")
            try:
                header[key] = float(parts[1])
            except ValueError:
                raise TerrainError(f"{path}:{lineno}: header {parts[0]!r} value {parts[1]!r} is not a number") from None
            continue
        if parts[0][0].isalpha():
            raise TerrainError(f"{path}:{lineno}: unknown header key {parts[0]!r}")
        missing = [k for k in REQUIRED_GRID_KEYS if k not in header]
        if missing:
            raise TerrainError(f"{path}:{lineno}: missing header key {missing[0]!r}")
        try:
            values = [float(p) for p in parts]
        except ValueError as exc:
            raise TerrainError(f"{path}:{lineno}: {exc}") from None
        if len(values) != int(header["ncols"]):
            raise TerrainError(f"{path}:{lineno}: expected {int(header['ncols'])} values, found {len(values)}")
        row_lines[len(rows)] = lineno
        rows.append(values)
    missing = [k for k in REQUIRED_GRID_KEYS if k not in header]
    if missing:
        raise TerrainError(f"{path}: missing header key {missing[0]!r}")
    if len(rows) != int(header["nrows"]):
        raise TerrainError(f"{path}:{lineno}: expected {int(header['nrows'])} data rows, found {len(rows)}")
    g = np.array(rows, dtype=float)
    g[g == header["nodata_value"]] = np.nan
    return header, g, row_lines


def _parse_csv_profile(path: Path):
    xs, zs = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        head = next(reader, None)
        if head is None or [h.strip() for h in head] != ["distance_m", "height_m"]:
            raise TerrainError(f"{path}:1: header must be 'distance_m,height_m'")
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 2:
                raise TerrainError(f"{path}:{lineno}: expected 2 columns, found {len(row)}")
            try:
                x, z = float(row[0]), float(row[1])
            except ValueError:
                raise TerrainError(f"{path}:{lineno}: non-numeric value in {row!r}") from None
            if not (math.isfinite(x) and math.isfinite(z)):
                raise TerrainError(f"{path}:{lineno}: non-finite value")
            if xs and x <= xs[-1]:
                raise TerrainError(f"{path}:{lineno}: distance {x:g} is not greater than previous {xs[-1]:g}")
            xs.append(x)
            zs.append(z)
    if len(xs) < 2:
        raise TerrainError(f"{path}: need at least two samples")
    return xs, zs


def load_terrain(path, format: str, rolling_resistance: float = 0.01, *, track_y: float | None = None) -> Terrain:
    """Read an ``ascii_grid`` heightmap or a ``csv_profile`` (distance_m,height_m)."""
    path = Path(path)
    if format == "ascii_grid":
        header, g, row_lines = _parse_ascii_grid(path)
        return heightmap(
            g, header["cellsize"], rolling_resistance,
            origin=(header.get("xllcorner", 0.0), header.get("yllcorner", 0.0)),
            track_y=track_y, nodata_rows=row_lines,
        )
    if format == "csv_profile":
        xs, zs = _parse_csv_profile(path)
        return profile(xs, zs, rolling_resistance)
    raise TerrainError(f"unknown terrain format {format!r}; expected ascii_grid or csv_profile")
