from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusfrag.lattice import (
    TorusGeom,
    box_points,
    chart,
    inner_boundary,
    linf_ball,
    linf_diameter,
    linf_radius,
    neighbors,
    nn_offsets,
    project,
    star_offsets,
    torus_distance,
    unchart,
    wrap_offset,
)

geoms = st.builds(TorusGeom, st.integers(3, 4), st.integers(4, 9))


def test_geometry_validation():
    with pytest.raises(ValueError):
        TorusGeom(2, 10)
    with pytest.raises(ValueError):
        TorusGeom(3, 3)
    with pytest.raises(ValueError):
        TorusGeom(3, 2000)


@given(geoms, st.data())
def test_index_coords_roundtrip(geom, data):
    s = data.draw(st.integers(0, geom.total - 1))
    assert geom.index(geom.coords(s)) == s


def test_neighbor_table_matches_neighbors():
    geom = TorusGeom(3, 5)
    table = geom.neighbor_table()
    for s in range(geom.total):
        assert table[s].tolist() == neighbors(s, geom)


@given(geoms, st.data())
def test_distance_is_a_metric(geom, data):
    x, y, z = (data.draw(st.integers(0, geom.total - 1)) for _ in range(3))
    assert torus_distance(x, x, geom) == 0
    assert torus_distance(x, y, geom) == torus_distance(y, x, geom)
    assert torus_distance(x, z, geom) <= torus_distance(x, y, geom) + torus_distance(y, z, geom)
    assert torus_distance(x, y, geom) <= geom.N // 2


def test_distance_brute_force():
    geom = TorusGeom(3, 6)
    x = 17
    cx = geom.coords(x)
    for y in range(geom.total):
        shifts = np.array(list(np.ndindex(3, 3, 3))) - 1
        best = int(np.abs(cx - geom.coords(y) - geom.N * shifts).max(axis=1).min())
        assert torus_distance(x, y, geom) == best


@given(geoms, st.data())
def test_chart_inverts_unchart(geom, data):
    c = data.draw(st.integers(0, geom.total - 1))
    m = geom.N // 4
    p = tuple(data.draw(st.integers(-m, m)) for _ in range(geom.d))
    q = unchart(c, p, geom)
    assert chart(c, q, geom) == p
    assert project(np.add(geom.coords(c), p), geom) == q


def test_chart_rejects_far_points():
    geom = TorusGeom(3, 8)
    with pytest.raises(ValueError):
        chart(0, geom.index([3, 0, 0]), geom)


def test_wrap_offset_range():
    N = 7
    r = wrap_offset(np.arange(-20, 20), N)
    assert r.min() > -N / 2 and r.max() <= N / 2
    assert np.all(np.mod(r - np.arange(-20, 20), N) == 0)


def test_balls():
    geom = TorusGeom(3, 9)
    ball = linf_ball(geom.index([0, 0, 0]), 2, geom)
    assert len(ball) == 125
    assert all(torus_distance(0, int(s), geom) <= 2 for s in ball)
    with pytest.raises(ValueError):
        linf_ball(0, 5, geom)
    pts = linf_ball([1, 1, 1], 1, d=3)
    assert pts.shape == (27, 3) and linf_radius(pts) == 2
    assert linf_diameter(box_points(3, 4)) == 6


def test_offsets():
    assert len(star_offsets(3)) == 26
    assert len(nn_offsets(4)) == 8
    assert np.abs(nn_offsets(3)).sum(axis=1).tolist() == [1] * 6


def test_inner_boundary_of_box():
    bnd = inner_boundary(box_points(2, 3))
    assert len(bnd) == 5**3 - 3**3
    assert np.all(np.abs(bnd).max(axis=1) == 2)
    assert len(inner_boundary(np.zeros((1, 3), dtype=np.int64))) == 1
