from __future__ import annotations

import json

import numpy as np
import pytest

from torusfrag.golden import (
    DEFAULT_BOXES,
    box_boundary,
    box_capacity,
    load_golden,
    lookup_equilibrium,
    orbit_key,
    regenerate,
)
from torusfrag.lattice import box_points
from torusfrag.potential import equilibrium

# exact values from the integral representation of the Green function (see test_potential)
EXACT = {0: 0.6594626704490008, 1: 3.1562058438739435, 2: 5.849583061586422, 4: 11.321501554021657}


def test_orbit_key():
    assert orbit_key([-1, 3, 0]) == "3,1,0" == orbit_key([0, 1, -3])


def test_regenerate_small_file(tmp_path):
    path = tmp_path / "g.json"
    data = regenerate(path, boxes={3: [1, 2]}, sets={"pair3": [[0, 0, 0], [1, 0, 0]]}, log=lambda m: None)
    assert json.loads(path.read_text()) == json.loads(json.dumps(data))
    eq = lookup_equilibrium(box_points(2, 3), path=path, compute=False)
    ref = equilibrium(box_points(2, 3), method="farfield")
    assert eq.method == "golden"
    order = np.lexsort(eq.boundary.T)
    ref_order = np.lexsort(ref.boundary.T)
    assert np.array_equal(eq.boundary[order], ref.boundary[ref_order])
    assert np.allclose(eq.weights[order], ref.weights[ref_order], rtol=1e-8)
    assert eq.capacity == pytest.approx(EXACT[2], rel=1e-6)
    # translated and reflected copies of a stored set are found
    pair = lookup_equilibrium(np.array([[5, 2, 2], [4, 2, 2]]), path=path, compute=False)
    assert pair.capacity == pytest.approx(0.9838781150091238, rel=1e-6)
    assert {tuple(p) for p in pair.boundary.tolist()} == {(5, 2, 2), (4, 2, 2)}
    with pytest.raises(KeyError):
        lookup_equilibrium(box_points(3, 3), path=path, compute=False)
    missing = lookup_equilibrium(np.array([[0, 0, 0], [2, 0, 0]]), path=path)
    assert missing.method == "far-field"


def test_shipped_file_covers_default_boxes():
    data = load_golden()
    for d, radii in DEFAULT_BOXES.items():
        for r in radii:
            entry = data["boxes"][f"{d}:{r}"]
            assert set(entry["orbits"]) == {orbit_key(p) for p in box_boundary(r, d).tolist()}
            # the stored error is the two-radius disagreement, a conservative bound
            assert entry["error"] < (1e-6 if d == 3 else 2e-4) * entry["capacity"]


@pytest.mark.parametrize("d,p_return", [(4, 0.193206300), (5, 0.135178609)])
def test_point_capacity_in_higher_dimensions(d, p_return):
    # one minus the return probability of simple random walk on Z^d
    eq = lookup_equilibrium(np.zeros((1, d), dtype=np.int64), compute=False)
    assert eq.capacity == pytest.approx(1 - p_return, rel=2e-5)


@pytest.mark.parametrize("r", [1, 2, 4])
def test_shipped_capacities_match_exact(r):
    assert box_capacity(r) == pytest.approx(EXACT[r], rel=1e-6)


def test_shipped_box_measure_is_symmetric():
    eq = lookup_equilibrium(box_points(6, 3), compute=False)
    assert eq.capacity == pytest.approx(eq.meta["capacity_recorded"], rel=1e-12)
    assert np.all(eq.weights > 0) and np.all(eq.weights < 1)
    # corners escape more easily than face centres
    w = dict(zip(map(tuple, eq.boundary.tolist()), eq.weights))
    assert w[(6, 6, 6)] > w[(6, 3, 0)] > w[(6, 0, 0)]


def test_capacity_grows_like_radius():
    caps = np.array([box_capacity(r) for r in range(2, 17)])
    assert np.all(np.diff(caps) > 0)
    slope = np.polyfit(np.log(np.arange(2, 17)), np.log(caps), 1)[0]
    assert 0.85 <= slope <= 1.15
