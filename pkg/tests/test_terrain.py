from __future__ import annotations

import logging
import math
from pathlib import Path

import numpy as np
import pytest

from rollfly.sim.terrain import TerrainError, flat, heightmap, load_terrain, profile

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def _write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_flat_plane_height_and_slope():
    t = flat(math.radians(2.0))
    assert t.height(10.0) == pytest.approx(10.0 * math.tan(math.radians(2.0)))
    assert t.slope_at(-3.0) == pytest.approx(math.radians(2.0))


def test_flat_rejects_vertical_and_bad_crr():
    with pytest.raises(TerrainError):
        flat(math.pi / 2)
    with pytest.raises(TerrainError, match="C_rr"):
        flat(0.0, 1.5)


def test_closest_on_plane_is_signed_normal_distance():
    s = math.radians(3.0)
    t = flat(s)
    f = t.closest(5.0, t.height(5.0) + 0.2, 1.0)
    assert f.distance == pytest.approx(0.2 * math.cos(s), rel=1e-12)
    assert (f.nx, f.nz) == pytest.approx((-math.sin(s), math.cos(s)))


def test_zero_heightmap_is_flat(tmp_path):
    p = _write(tmp_path, "z.asc", "ncols 2\nnrows 2\ncellsize 1\nnodata_value -9999\n0 0\n0 0\n")
    t = load_terrain(p, "ascii_grid")
    for x in (0.0, 0.3, 1.0):
        assert t.height(x) == 0.0
        assert t.slope_at(x) == 0.0


def test_profile_constant_grade():
    t = profile([0.0, 10.0, 20.0], [0.0, 0.349, 0.698])
    assert t.slope_at(5.0) == pytest.approx(math.atan(0.0349), rel=1e-12)
    assert t.height(15.0) == pytest.approx(0.5235, rel=1e-12)


def test_profile_outside_bounds():
    t = profile([0.0, 1.0], [0.0, 0.0])
    with pytest.raises(TerrainError, match="outside the terrain"):
        t.height(2.0)


def test_profile_vertex_distance():
    # a ridge: the closest feature to a point above it is the vertex
    t = profile([0.0, 1.0, 2.0], [0.0, 1.0, 0.0])
    f = t.closest(1.0, 1.5, 2.0)
    assert f.vertex
    assert f.distance == pytest.approx(0.5)


def test_heightmap_bilinear_track():
    g = np.array([[2.0, 2.0], [0.0, 0.0]])
    t = heightmap(g, 1.0, track_y=0.25)
    assert t.height(0.5) == pytest.approx(0.5)


def test_heightmap_lateral_slope_warns(caplog):
    with caplog.at_level(logging.WARNING):
        heightmap(np.array([[1.0, 1.0], [0.0, 0.0]]), 1.0)
    assert "lateral slope" in caplog.text


def test_missing_cellsize_names_key(tmp_path):
    p = _write(tmp_path, "m.asc", "ncols 2\nnrows 1\nnodata_value -9999\n0 0\n")
    with pytest.raises(TerrainError, match="'cellsize'"):
        load_terrain(p, "ascii_grid")


def test_nodata_on_track_cites_line(tmp_path):
    p = _write(tmp_path, "n.asc", "ncols 3\nnrows 1\ncellsize 1\nnodata_value -9999\n0 -9999 0\n")
    with pytest.raises(TerrainError, match=r"line 5"):
        load_terrain(p, "ascii_grid")


def test_bad_row_width_cites_line(tmp_path):
    p = _write(tmp_path, "w.asc", "ncols 3\nnrows 2\ncellsize 1\nnodata_value -9999\n0 0 0\n0 0\n")
    with pytest.raises(TerrainError, match=r"w.asc:6: expected 3 values"):
        load_terrain(p, "ascii_grid")


def test_non_monotone_profile(tmp_path):
    p = _write(tmp_path, "p.csv", "distance_m,height_m\n0,0\n2,0\n1,0\n")
    with pytest.raises(TerrainError, match=r"p.csv:4: distance 1 is not greater"):
        load_terrain(p, "csv_profile")


def test_profile_header_required(tmp_path):
    p = _write(tmp_path, "h.csv", "x,z\n0,0\n1,0\n")
    with pytest.raises(TerrainError, match="header"):
        load_terrain(p, "csv_profile")


def test_unknown_format(tmp_path):
    with pytest.raises(TerrainError, match="unknown terrain format"):
        load_terrain(tmp_path / "x", "geotiff")


def test_shipped_terrains_load():
    p = load_terrain(SCENARIOS / "profile.csv", "csv_profile")
    h = load_terrain(SCENARIOS / "heightmap.asc", "ascii_grid", track_y=5.0)
    assert p.bounds[1] == pytest.approx(122.5)
    assert h.bounds == pytest.approx((0.0, 80.0))
