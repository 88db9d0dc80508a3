from __future__ import annotations

from collections import deque
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from torusfrag.components import (
    _sorted_stats,
    label_components,
    label_torus,
    local_average,
    local_average_bfs,
    local_radius,
    plane_analysis,
    plane_sites,
    uniqueness_check,
)
from torusfrag.lattice import TorusGeom, wrap_offset
from torusfrag.rng import stream
from torusfrag.rw import WalkConfig, walk_trace


def bfs_components(occ: np.ndarray, n: int, d: int, adjacency: str, wrap: bool) -> list[set[int]]:
    """Reference labelling by breadth-first search on explicit coordinates."""
    offs = [o for o in product((-1, 0, 1), repeat=d) if any(o)]
    if adjacency == "nn":
        offs = [o for o in offs if sum(map(abs, o)) == 1]
    shape = (n,) * d
    seen = np.zeros(occ.shape[0], dtype=bool)
    comps = []
    for s in range(occ.shape[0]):
        if occ[s] or seen[s]:
            continue
        comp = {s}
        seen[s] = True
        todo = deque([s])
        while todo:
            c = np.array(np.unravel_index(todo.popleft(), shape))
            for o in offs:
                q = c + o
                if wrap:
                    q %= n
                elif (q < 0).any() or (q >= n).any():
                    continue
                t = int(np.ravel_multi_index(tuple(q), shape))
                if not occ[t] and not seen[t]:
                    seen[t] = True
                    comp.add(t)
                    todo.append(t)
        comps.append(comp)
    return comps


def brute_diameter(sites, n, d, wrap):
    c = np.array(np.unravel_index(np.fromiter(sites, dtype=np.int64), (n,) * d)).T
    diff = c[:, None, :] - c[None, :, :]
    if wrap:
        diff = wrap_offset(diff, n)
    return int(np.abs(diff).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 7), st.floats(0.2, 0.8), st.sampled_from(["nn", "star"]), st.sampled_from(["torus", "box"]),
       st.integers(0, 10_000))
def test_labels_match_bfs(n, p, adjacency, mode, seed):
    d = 3
    occ = stream(seed, "mask").random(n**d) < p
    stats = label_components(occ, n, d, adjacency, mode)
    ref = bfs_components(occ, n, d, adjacency, mode == "torus")
    got = {}
    for s in np.flatnonzero(~occ):
        got.setdefault(int(stats.labels[s]), set()).add(int(s))
    assert sorted(map(frozenset, got.values()), key=sorted) == sorted(map(frozenset, ref), key=sorted)
    assert stats.volumes.tolist() == sorted((len(c) for c in ref), reverse=True)
    assert stats.vacant + stats.occupied == n**d
    assert np.all(stats.labels[occ] == -1)
    for k in range(stats.count):
        members = set(np.flatnonzero(stats.labels == k).tolist())
        assert stats.volumes[k] == len(members)
        assert stats.roots[k] == min(members)
        assert stats.diameters[k] == brute_diameter(members, n, d, mode == "torus")


@settings(max_examples=200, deadline=None)
@given(st.integers(2, 30), st.data())
def test_sorted_stats_against_brute_force(n, data):
    vals = sorted(set(data.draw(st.lists(st.integers(0, n - 1), min_size=1, max_size=n))))
    arr = np.array(vals + [0] * 3, dtype=np.int64)
    for wrap in (True, False):
        ext, diam = _sorted_stats(arr, len(vals), n, wrap)
        dists = [min(abs(a - b), n - abs(a - b)) if wrap else abs(a - b) for a in vals for b in vals]
        assert diam == max(dists)
        if wrap:
            # shortest circular arc covering every value
            best = min(((vals[i - 1] - vals[i]) % n) + 1 for i in range(len(vals))) if len(vals) > 1 else 1
            assert ext == best
        else:
            assert ext == vals[-1] - vals[0] + 1


def test_empty_and_full_masks():
    n, d = 5, 3
    full = label_components(np.ones(n**d, dtype=bool), n, d)
    assert full.count == 0 and full.c_max == 0 and full.id_max is None
    empty = label_components(np.zeros(n**d, dtype=bool), n, d)
    assert empty.count == 1 and empty.c_max == n**d and empty.wraps_all_axes
    assert empty.extent_saturated()
    with pytest.raises(ValueError):
        label_components(np.zeros(10, dtype=bool), n, d)
    with pytest.raises(ValueError):
        label_components(np.zeros(n**d, dtype=bool), n, d, mode="sphere")


def test_winding_detects_blocked_axis():
    n, d = 8, 3
    occ = np.zeros((n,) * d, dtype=bool)
    occ[3, :, :] = True  # a wall across axis 0
    stats = label_components(occ.ravel(), n, d)
    assert stats.count == 1
    assert stats.wraps.tolist() == [False, True, True]
    # the component still spans the full extent of every axis but axis 0
    assert stats.extents[0].tolist() == [n - 1, n, n]


def test_tube_wraps_one_axis():
    n, d = 8, 3
    occ = np.ones((n,) * d, dtype=bool)
    occ[:, 2, 2] = False
    stats = label_components(occ.ravel(), n, d)
    assert stats.count == 1 and stats.c_max == n
    assert stats.wraps.tolist() == [True, False, False]


def test_second_component_and_ties():
    n, d = 8, 3
    occ = np.ones((n,) * d, dtype=bool)
    occ[0, 0, 0:2] = False
    occ[4, 4, 4:6] = False
    occ[2, 6, 6] = False
    stats = label_components(occ.ravel(), n, d, mode="box")
    assert stats.volumes.tolist() == [2, 2, 1]
    # ties are broken by the smallest site index
    assert stats.roots[0] < stats.roots[1]
    assert stats.c_sec == 2


def test_walk_trace_complement_partition():
    geom = TorusGeom(3, 16)
    bits = walk_trace(WalkConfig(geom, 3 * 16**3, seed=4)).bits
    stats = label_torus(geom, bits)
    assert stats.vacant == geom.total - bits.sum()


@pytest.mark.parametrize("seed", [0, 1])
def test_local_average_matches_bfs(seed):
    geom = TorusGeom(3, 12)
    occ = walk_trace(WalkConfig(geom, 2 * 12**3, seed=seed)).bits
    for delta in (0.5, 0.75):
        assert local_average(geom, occ, delta) == local_average_bfs(geom, occ, delta)


def test_local_average_edge_cases():
    geom = TorusGeom(3, 10)
    assert local_radius(64, 0.5) == 4
    assert local_average(geom, np.zeros(geom.total, dtype=bool), 0.5) == 1.0
    assert local_average(geom, np.ones(geom.total, dtype=bool), 0.5) == 0.0
    with pytest.raises(ValueError):
        local_average(geom, np.zeros(geom.total, dtype=bool), 1.5)


def test_plane_analysis_simple_planes():
    geom = TorusGeom(3, 10)
    x = geom.index([0, 0, 5])
    ps = plane_sites(geom, x)
    assert ps.shape == (10, 10) and len(set(ps.ravel().tolist())) == 100
    assert np.all(geom.coords(ps.ravel())[:, 2] == 5)
    occ = np.zeros(geom.total, dtype=bool)
    rep = plane_analysis(geom, occ, x, 3)
    assert rep.crossing_found and rep.lr_crossing and rep.tb_crossing
    assert rep.star_diameter == -1 and len(rep.seeds) == 100
    # fully occupy a line of the plane: no vacant component crosses both ways
    occ[ps[:, 4]] = True
    rep = plane_analysis(geom, occ, x, 3)
    assert rep.tb_crossing is False or rep.lr_crossing is False
    assert not rep.crossing_found
    assert rep.star_diameter == 9
    occ[ps] = True
    rep = plane_analysis(geom, occ, x, 3)
    assert len(rep.seeds) == 0 and not rep.crossing_found


def test_uniqueness_on_empty_and_shattered_masks():
    geom = TorusGeom(3, 30)
    rep = uniqueness_check(geom, np.zeros(geom.total, dtype=bool), 3)
    assert rep.hypotheses_hold and rep.conclusion_holds and rep.large_components == 1
    # isolated vacant sites: nothing has diameter >= ell, hypothesis 1 fails
    occ = np.ones((30,) * 3, dtype=bool)
    occ[::3, ::3, ::3] = False
    rep = uniqueness_check(geom, occ.ravel(), 3)
    assert not rep.hypothesis1 and not rep.conclusion_holds
    with pytest.raises(ValueError):
        uniqueness_check(geom, occ.ravel(), 4)


def test_uniqueness_two_slabs_fail_hypothesis_two():
    geom = TorusGeom(3, 40)
    occ = np.zeros((40,) * 3, dtype=bool)
    occ[0:2] = True
    occ[20:22] = True  # two parallel walls split the vacant set into two slabs
    rep = uniqueness_check(geom, occ.ravel(), 3, full_scan=True)
    assert rep.large_components == 2
    assert not rep.hypothesis2 and not rep.conclusion_holds


@settings(max_examples=15, deadline=None)
@given(st.floats(0.1, 5.0), st.integers(0, 1000))
def test_uniqueness_hypotheses_imply_conclusion(u, seed):
    geom = TorusGeom(3, 30)
    occ = walk_trace(WalkConfig(geom, int(u * 30**3), seed=seed)).bits
    rep = uniqueness_check(geom, occ, 3)
    assert (not rep.hypotheses_hold) or rep.conclusion_holds
