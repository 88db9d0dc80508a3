"""Connected components of vacant sets.

Masks passed in mark OCCUPIED sites; the components are those of the vacant
complement. Sites are indexed row-major on a cube of side ``n`` in ``d``
dimensions, either periodic (the torus) or with free boundary (a box).

Component ids are ranks: 0 is the largest component, ties broken by the
smallest site index in the component. Occupied sites get label -1.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .lattice import TorusGeom, nn_offsets, star_offsets

ADJACENCY = ("nn", "star")
MODES = ("torus", "box")


def forward_offsets(d: int, adjacency: str) -> np.ndarray:
    """Half of the neighbour offsets (first non-zero coordinate positive); each edge is seen once."""
    if adjacency not in ADJACENCY:
        raise ValueError(f"adjacency must be one of {ADJACENCY}")
    offs = nn_offsets(d) if adjacency == "nn" else star_offsets(d)
    keep = []
    for o in offs:
        nz = o[np.flatnonzero(o)[0]]
        if nz > 0:
            keep.append(o)
    return np.asarray(keep, dtype=np.int64)


def all_offsets(d: int, adjacency: str) -> np.ndarray:
    return nn_offsets(d) if adjacency == "nn" else star_offsets(d)


@nb.njit(cache=True)
def _find(parent, a):
    while parent[a] != a:
        parent[a] = parent[parent[a]]
        a = parent[a]
    return a


@nb.njit(cache=True)
def _neighbor(s, coords, off, n, strides, wrap):
    # site index of s + off, or -1 when it leaves a free-boundary box
    t = s
    for a in range(coords.shape[0]):
        o = off[a]
        if o == 0:
            continue
        c = coords[a] + o
        if c < 0 or c >= n:
            if not wrap:
                return -1
            c = c % n
        t += (c - coords[a]) * strides[a]
    return t


@nb.njit(cache=True)
def _union_find(occ, n, d, offsets, wrap):
    total = occ.shape[0]
    parent = np.arange(total, dtype=np.int64)
    strides = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        strides[a] = st
        st *= n
    coords = np.zeros(d, dtype=np.int64)
    for s in range(total):
        if s > 0:
            a = d - 1
            coords[a] += 1
            while coords[a] == n:
                coords[a] = 0
                a -= 1
                coords[a] += 1
        if occ[s]:
            continue
        for k in range(offsets.shape[0]):
            t = _neighbor(s, coords, offsets[k], n, strides, wrap)
            if t < 0 or occ[t]:
                continue
            ra = _find(parent, s)
            rb = _find(parent, t)
            if ra < rb:
                parent[rb] = ra
            elif rb < ra:
                parent[ra] = rb
    roots = np.full(total, -1, dtype=np.int64)
    for s in range(total):
        if not occ[s]:
            roots[s] = _find(parent, s)
    return roots


@nb.njit(cache=True)
def _circ_stats(present, n, wrap):
    # (extent, diameter) of a set of coordinates on Z/n (wrap) or on {0..n-1}
    lo = -1
    hi = -1
    cnt = 0
    for c in range(n):
        if present[c]:
            if lo < 0:
                lo = c
            hi = c
            cnt += 1
    if cnt == 0:
        return 0, 0
    if not wrap:
        return hi - lo + 1, hi - lo
    # largest circular gap between consecutive present coordinates
    gap = lo + n - hi
    prev = lo
    for c in range(lo + 1, n):
        if present[c]:
            if c - prev > gap:
                gap = c - prev
            prev = c
    extent = n - gap + 1
    # farthest circular distance: for each present x, distance to the present
    # point nearest to its antipode(s)
    near = np.empty(n, dtype=np.int64)  # circular distance to nearest present coordinate
    big = 4 * n
    last = -big
    for k in range(2 * n):
        c = k % n
        if present[c]:
            last = k
        if k >= n:
            near[c] = k - last
    last = big
    for k in range(2 * n - 1, -1, -1):
        c = k % n
        if present[c]:
            last = k
        if k < n:
            v = last - k
            if v < near[c]:
                near[c] = v
    diam = 0
    half = n // 2
    for x in range(n):
        if not present[x]:
            continue
        if n % 2 == 0:
            dd = half - near[(x + half) % n]
        else:
            a1 = (x + half) % n
            a2 = (x + half + 1) % n
            m = near[a1] if near[a1] < near[a2] else near[a2]
            dd = half - m
        if dd > diam:
            diam = dd
    return extent, diam


@nb.njit(cache=True)
def _sorted_stats(vals, m, n, wrap):
    # (extent, diameter) of the sorted distinct coordinates vals[:m]
    if m == 0:
        return 0, 0
    lo = vals[0]
    hi = vals[m - 1]
    if not wrap:
        return hi - lo + 1, hi - lo
    gap = lo + n - hi
    for i in range(1, m):
        g = vals[i] - vals[i - 1]
        if g > gap:
            gap = g
    extent = n - gap + 1
    diam = 0
    half = n // 2
    for i in range(m):
        x = vals[i]
        # candidates closest to the antipode x + n/2, on either side, circularly
        target = x + half
        if target >= n:
            target -= n
        j = np.searchsorted(vals[:m], target)
        for jj in (j - 1, j, j + 1):
            y = vals[jj % m]
            dd = abs(y - x)
            if n - dd < dd:
                dd = n - dd
            if dd > diam:
                diam = dd
    return extent, diam


@nb.njit(cache=True)
def _component_geometry(order, starts, n, d, wrap):
    # order: vacant sites grouped by component; starts[k]..starts[k+1]
    K = starts.shape[0] - 1
    extents = np.zeros((K, d), dtype=np.int64)
    diams = np.zeros(K, dtype=np.int64)
    strides = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        strides[a] = st
        st *= n
    present = np.zeros((d, n), dtype=np.bool_)
    buf = np.empty(n, dtype=np.int64)
    for k in range(K):
        v = starts[k + 1] - starts[k]
        for i in range(starts[k], starts[k + 1]):
            rem = order[i]
            for a in range(d):
                c = rem // strides[a]
                rem -= c * strides[a]
                present[a, c] = True
        best = 0
        for a in range(d):
            m = 0
            if v < n // 4:
                # small component: gather its few coordinates instead of scanning the axis
                for i in range(starts[k], starts[k + 1]):
                    c = (order[i] // strides[a]) % n
                    if present[a, c]:
                        present[a, c] = False
                        buf[m] = c
                        m += 1
                vals = np.sort(buf[:m])
            else:
                for c in range(n):
                    if present[a, c]:
                        present[a, c] = False
                        buf[m] = c
                        m += 1
                vals = buf[:m]
            e, dm = _sorted_stats(vals, m, n, wrap)
            extents[k, a] = e
            if dm > best:
                best = dm
        diams[k] = best
    return extents, diams


@nb.njit(cache=True)
def _winding(labels, comp, n, d, offsets):
    # BFS over one component assigning each site a lift to Z^d; an edge that
    # closes with an inconsistent lift winds around the torus along the axes
    # where the lifts disagree
    total = labels.shape[0]
    wraps = np.zeros(d, dtype=np.bool_)
    strides = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        strides[a] = st
        st *= n
    start = -1
    for s in range(total):
        if labels[s] == comp:
            start = s
            break
    if start < 0:
        return wraps
    lift = np.zeros((total, d), dtype=np.int32)  # winding number per axis
    seen = np.zeros(total, dtype=np.bool_)
    stack = np.empty(total, dtype=np.int64)
    top = 1
    stack[0] = start
    seen[start] = True
    coords = np.zeros(d, dtype=np.int64)
    while top > 0:
        top -= 1
        s = stack[top]
        rem = s
        for a in range(d):
            coords[a] = rem // strides[a]
            rem -= coords[a] * strides[a]
        for k in range(offsets.shape[0]):
            t = s
            for a in range(d):
                c = coords[a] + offsets[k, a]
                if c < 0 or c >= n:
                    c = c % n
                t += (c - coords[a]) * strides[a]
            if labels[t] != comp:
                continue
            if not seen[t]:
                seen[t] = True
                for a in range(d):
                    c = coords[a] + offsets[k, a]
                    lift[t, a] = lift[s, a] + (1 if c >= n else (-1 if c < 0 else 0))
                stack[top] = t
                top += 1
            else:
                for a in range(d):
                    c = coords[a] + offsets[k, a]
                    expect = lift[s, a] + (1 if c >= n else (-1 if c < 0 else 0))
                    if expect != lift[t, a]:
                        wraps[a] = True
    return wraps


@dataclass
class ComponentStats:
    labels: np.ndarray  # int32 per site, -1 where occupied
    volumes: np.ndarray  # int64, descending
    roots: np.ndarray  # smallest site index of each component
    extents: np.ndarray  # (K, d) per-axis extent (circular on the torus)
    diameters: np.ndarray  # (K,) l-infinity diameter (torus metric in torus mode)
    n: int
    d: int
    mode: str
    adjacency: str
    wraps: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))  # axes wound by C_max
    wraps_sec: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))

    @property
    def count(self) -> int:
        return len(self.volumes)

    @property
    def id_max(self) -> int | None:
        return 0 if self.count else None

    @property
    def id_sec(self) -> int | None:
        return 1 if self.count > 1 else None

    @property
    def c_max(self) -> int:
        return int(self.volumes[0]) if self.count else 0

    @property
    def c_sec(self) -> int:
        return int(self.volumes[1]) if self.count > 1 else 0

    @property
    def vacant(self) -> int:
        return int(self.volumes.sum())

    @property
    def occupied(self) -> int:
        return self.labels.shape[0] - self.vacant

    @property
    def wraps_all_axes(self) -> bool:
        return bool(self.wraps.size and self.wraps.all())

    def extent_saturated(self, k: int = 0) -> bool:
        """Every axis extent of component k equals n (the diameter can no longer grow)."""
        return bool(self.count and (self.extents[k] == self.n).all())

    def grid(self) -> np.ndarray:
        return self.labels.reshape((self.n,) * self.d)


def label_components(occupied: np.ndarray, n: int, d: int, adjacency: str = "nn", mode: str = "torus",
                     winding: bool = True) -> ComponentStats:
    """Label the vacant complement of ``occupied`` (bool, length n^d)."""
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    occ = np.ascontiguousarray(np.asarray(occupied, dtype=np.bool_).ravel())
    if occ.shape[0] != n**d:
        raise ValueError(f"mask has {occ.shape[0]} sites, expected {n}^{d}")
    wrap = mode == "torus"
    roots = _union_find(occ, n, d, forward_offsets(d, adjacency), wrap)
    vac = np.flatnonzero(~occ)
    labels = np.full(occ.shape[0], -1, dtype=np.int32)
    if vac.size == 0:
        empty = np.zeros(0, dtype=np.int64)
        return ComponentStats(labels, empty, empty, np.zeros((0, d), dtype=np.int64), empty, n, d, mode, adjacency,
                              np.zeros(d, dtype=bool), np.zeros(d, dtype=bool))
    r = roots[vac]
    uroots, inverse, counts = np.unique(r, return_inverse=True, return_counts=True)
    # uroots is ascending, so a stable sort on -count breaks ties by root index
    rank_order = np.argsort(-counts, kind="stable")
    rank = np.empty_like(rank_order)
    rank[rank_order] = np.arange(len(rank_order))
    labels[vac] = rank[inverse].astype(np.int32)
    volumes = counts[rank_order].astype(np.int64)
    comp_roots = uroots[rank_order]
    lab = labels[vac]
    order = vac[np.argsort(lab, kind="stable")]
    starts = np.concatenate([[0], np.cumsum(volumes)]).astype(np.int64)
    extents, diams = _component_geometry(order, starts, n, d, wrap)
    stats = ComponentStats(labels, volumes, comp_roots, extents, diams, n, d, mode, adjacency)
    if wrap and winding:
        offs = all_offsets(d, adjacency)
        stats.wraps = _winding(labels, 0, n, d, offs)
        stats.wraps_sec = _winding(labels, 1, n, d, offs) if stats.count > 1 else np.zeros(d, dtype=bool)
    else:
        stats.wraps = np.zeros(d, dtype=bool)
        stats.wraps_sec = np.zeros(d, dtype=bool)
    return stats


def label_torus(geom: TorusGeom, occupied: np.ndarray, adjacency: str = "nn", winding: bool = True) -> ComponentStats:
    return label_components(occupied, geom.N, geom.d, adjacency, "torus", winding)


# --------------------------------------------------------------------------
# Bounded searches
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def _reaches_sphere(vacant, n, d, start, R, wrap, sdims):
    """Is ``start`` joined to a site at l-inf distance R inside B(start, R) through vacant sites?

    ``sdims`` lists the axes along which moves are allowed (others stay fixed).
    """
    if not vacant[start]:
        return False
    if R == 0:
        return True
    strides = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        strides[a] = st
        st *= n
    m = sdims.shape[0]
    side = 2 * R + 1
    size = side**m
    seen = np.zeros(size, dtype=np.bool_)
    stack_site = np.empty(size, dtype=np.int64)
    stack_off = np.empty((size, m), dtype=np.int64)
    base = np.zeros(d, dtype=np.int64)
    rem = start
    for a in range(d):
        base[a] = rem // strides[a]
        rem -= base[a] * strides[a]
    top = 1
    stack_site[0] = start
    for j in range(m):
        stack_off[0, j] = 0
    key0 = 0
    for j in range(m):
        key0 = key0 * side + R
    seen[key0] = True
    off = np.zeros(m, dtype=np.int64)
    while top > 0:
        top -= 1
        s = stack_site[top]
        for j in range(m):
            off[j] = stack_off[top, j]
        for j in range(m):
            a = sdims[j]
            for step in (-1, 1):
                o = off[j] + step
                if o < -R or o > R:
                    continue
                c = base[a] + o
                if c < 0 or c >= n:
                    if not wrap:
                        continue
                    c = c % n
                cur = base[a] + off[j]
                if cur < 0 or cur >= n:
                    cur = cur % n
                t = s + (c - cur) * strides[a]
                if not vacant[t]:
                    continue
                key = 0
                for jj in range(m):
                    v = o if jj == j else off[jj]
                    key = key * side + (v + R)
                if seen[key]:
                    continue
                if o == R or o == -R:
                    return True
                seen[key] = True
                stack_site[top] = t
                for jj in range(m):
                    stack_off[top, jj] = off[jj]
                stack_off[top, j] = o
                top += 1
    return False


@nb.njit(cache=True)
def _boundary_fraction(vacant, n, d, R, labels, diams, use_filter, sdims, sites):
    hits = 0
    for i in range(sites.shape[0]):
        s = sites[i]
        if not vacant[s]:
            continue
        if use_filter and diams[labels[s]] < R:
            continue
        if _reaches_sphere(vacant, n, d, s, R, True, sdims):
            hits += 1
    return hits


def local_radius(N: int, delta: float) -> int:
    return int(np.floor(N**delta / 2))


def local_average(geom: TorusGeom, occupied: np.ndarray, delta: float, stats: ComponentStats | None = None) -> float:
    """Fraction of sites x that are vacant and joined to the inner boundary of B(x, N^delta/2) through vacant sites.

    A site whose whole vacant component has diameter below the radius cannot
    reach the sphere, so those are skipped using the component labels; the
    rest get a bounded search.
    """
    if not 0 < delta < 1:
        raise ValueError("delta must lie in (0, 1)")
    R = local_radius(geom.N, delta)
    if R < 1:
        raise ValueError("N^delta/2 must be at least 1")
    if 2 * R + 1 > geom.N:
        raise ValueError("ball B(x, N^delta/2) wraps around the torus")
    occ = np.asarray(occupied, dtype=np.bool_).ravel()
    stats = stats or label_torus(geom, occ, winding=False)
    vac = ~occ
    hits = _boundary_fraction(vac, geom.N, geom.d, R, stats.labels, stats.diameters, True,
                              np.arange(geom.d, dtype=np.int64), np.arange(geom.total, dtype=np.int64))
    return hits / geom.total


def local_average_bfs(geom: TorusGeom, occupied: np.ndarray, delta: float) -> float:
    """Same quantity with a bounded search from every vacant site (no component shortcut)."""
    R = local_radius(geom.N, delta)
    vac = ~np.asarray(occupied, dtype=np.bool_).ravel()
    dummy = np.zeros(1, dtype=np.int64)
    hits = _boundary_fraction(vac, geom.N, geom.d, R, np.zeros(geom.total, dtype=np.int32), dummy, False,
                              np.arange(geom.d, dtype=np.int64), np.arange(geom.total, dtype=np.int64))
    return hits / geom.total


# --------------------------------------------------------------------------
# Horizontal planes
# --------------------------------------------------------------------------

@dataclass
class PlaneReport:
    x: int
    ell: int
    crossing_found: bool
    crossing_component: int | None  # smallest site index of the crossing component
    seeds: np.ndarray  # torus site indices
    star_diameter: int  # largest l-inf diameter of an occupied star-component of the square
    lr_crossing: bool
    tb_crossing: bool


def plane_sites(geom: TorusGeom, x: int) -> np.ndarray:
    """Sites of the plane through x where the first two coordinates vary, as an (N, N) array."""
    c = geom.coords(x)
    i, j = np.meshgrid(np.arange(geom.N), np.arange(geom.N), indexing="ij")
    pts = np.broadcast_to(c, (geom.N, geom.N, geom.d)).copy()
    pts[..., 0] = i
    pts[..., 1] = j
    return geom.index(pts.reshape(-1, geom.d)).reshape(geom.N, geom.N)


def plane_analysis(geom: TorusGeom, occupied: np.ndarray, x: int, ell: int) -> PlaneReport:
    """Seeds, crossings and occupied star-paths in the plane through x.

    Seeds use the periodic plane (a seed y is joined to the inner boundary of
    B(y, ell) inside the plane's vacant set). Crossings and star-paths are
    taken in the non-wrapping square {0..N-1}^2: a vacant component has a
    crossing when it joins the left and right sides and also the top and
    bottom sides.
    """
    if 2 * ell > geom.N:
        raise ValueError("need ell <= N/2")
    occ = np.asarray(occupied, dtype=np.bool_).ravel()
    ps = plane_sites(geom, x)
    sq = occ[ps]  # (N, N) occupied
    N = geom.N
    vac_stats = label_components(sq.ravel(), N, 2, "nn", "box", winding=False)
    lab = vac_stats.labels.reshape(N, N)
    lr = set(lab[0, :][lab[0, :] >= 0].tolist()) & set(lab[N - 1, :][lab[N - 1, :] >= 0].tolist())
    tb = set(lab[:, 0][lab[:, 0] >= 0].tolist()) & set(lab[:, N - 1][lab[:, N - 1] >= 0].tolist())
    both = sorted(lr & tb)
    crossing = both[0] if both else None
    star_stats = label_components(~sq.ravel(), N, 2, "star", "box", winding=False)
    star_diam = int(star_stats.diameters.max()) if star_stats.count else -1
    seeds = np.zeros(0, dtype=np.int64)
    if ell >= 0:
        vac_plane = ~sq.ravel()
        hits = [k for k in range(N * N) if _reaches_sphere(vac_plane, N, 2, k, ell, True, np.arange(2, dtype=np.int64))]
        seeds = np.sort(ps.ravel()[np.asarray(hits, dtype=np.int64)]) if hits else seeds
    return PlaneReport(x=x, ell=ell, crossing_found=crossing is not None,
                       crossing_component=int(vac_stats.roots[crossing]) if crossing is not None else None,
                       seeds=seeds, star_diameter=star_diam, lr_crossing=bool(lr), tb_crossing=bool(tb))


# --------------------------------------------------------------------------
# Uniqueness of the large component
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def _ball_has_large(vacant, n, d, center_coords, r, ell):
    # does the induced subgraph on B(center, r) (r < n/2 - so a cube with no
    # wrap edges) have a vacant component of chart diameter >= ell?
    side = 2 * r + 1
    size = side**d
    strides = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        strides[a] = st
        st *= n
    lstr = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        lstr[a] = st
        st *= side
    seen = np.zeros(size, dtype=np.bool_)
    stack = np.empty(size, dtype=np.int64)
    lo = np.empty(d, dtype=np.int64)
    hi = np.empty(d, dtype=np.int64)
    loc = np.empty(d, dtype=np.int64)
    for k0 in range(size):
        if seen[k0]:
            continue
        # global site of local index k0
        rem = k0
        g = 0
        for a in range(d):
            loc[a] = rem // lstr[a]
            rem -= loc[a] * lstr[a]
            g += ((center_coords[a] + loc[a] - r) % n) * strides[a]
        if not vacant[g]:
            seen[k0] = True
            continue
        seen[k0] = True
        for a in range(d):
            lo[a] = loc[a]
            hi[a] = loc[a]
        top = 1
        stack[0] = k0
        while top > 0:
            top -= 1
            k = stack[top]
            rem = k
            for a in range(d):
                loc[a] = rem // lstr[a]
                rem -= loc[a] * lstr[a]
            for a in range(d):
                for step in (-1, 1):
                    c = loc[a] + step
                    if c < 0 or c >= side:
                        continue
                    kk = k + step * lstr[a]
                    if seen[kk]:
                        continue
                    gg = 0
                    for b in range(d):
                        cb = c if b == a else loc[b]
                        gg += ((center_coords[b] + cb - r) % n) * strides[b]
                    if not vacant[gg]:
                        continue
                    seen[kk] = True
                    if c < lo[a]:
                        lo[a] = c
                    if c > hi[a]:
                        hi[a] = c
                    if hi[a] - lo[a] >= ell:
                        return True
                    stack[top] = kk
                    top += 1
    return False


@nb.njit(cache=True)
def _ball_large_labels(vacant, labels, n, d, center_coords, r, ell):
    # global labels of the vacant components of the induced subgraph on
    # B(center, r) whose torus diameter is >= ell; returns True if they all agree
    side = 2 * r + 1
    size = side**d
    strides = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        strides[a] = st
        st *= n
    lstr = np.empty(d, dtype=np.int64)
    st = 1
    for a in range(d - 1, -1, -1):
        lstr[a] = st
        st *= side
    seen = np.zeros(size, dtype=np.bool_)
    stack = np.empty(size, dtype=np.int64)
    members = np.empty(size, dtype=np.int64)
    present = np.zeros((d, n), dtype=np.bool_)
    loc = np.empty(d, dtype=np.int64)
    agreed = -1
    for k0 in range(size):
        if seen[k0]:
            continue
        seen[k0] = True
        rem = k0
        g = 0
        for a in range(d):
            loc[a] = rem // lstr[a]
            rem -= loc[a] * lstr[a]
            g += ((center_coords[a] + loc[a] - r) % n) * strides[a]
        if not vacant[g]:
            continue
        top = 1
        stack[0] = k0
        nm = 0
        while top > 0:
            top -= 1
            k = stack[top]
            members[nm] = k
            nm += 1
            rem = k
            for a in range(d):
                loc[a] = rem // lstr[a]
                rem -= loc[a] * lstr[a]
            for a in range(d):
                for step in (-1, 1):
                    c = loc[a] + step
                    if c < 0 or c >= side:
                        continue
                    kk = k + step * lstr[a]
                    if seen[kk]:
                        continue
                    gg = 0
                    for b in range(d):
                        cb = c if b == a else loc[b]
                        gg += ((center_coords[b] + cb - r) % n) * strides[b]
                    if not vacant[gg]:
                        continue
                    seen[kk] = True
                    stack[top] = kk
                    top += 1
        for i in range(nm):
            rem = members[i]
            for a in range(d):
                c = rem // lstr[a]
                rem -= c * lstr[a]
                present[a, (center_coords[a] + c - r) % n] = True
        diam = 0
        for a in range(d):
            e, dm = _circ_stats(present[a], n, True)
            if dm > diam:
                diam = dm
            for c in range(n):
                present[a, c] = False
        if diam >= ell:
            rem = members[0]
            g = 0
            for a in range(d):
                c = rem // lstr[a]
                rem -= c * lstr[a]
                g += ((center_coords[a] + c - r) % n) * strides[a]
            lab = labels[g]
            if agreed < 0:
                agreed = lab
            elif lab != agreed:
                return False
    return True


@dataclass
class UniquenessReport:
    hypotheses_hold: bool
    hypothesis1: bool
    hypothesis2: bool
    conclusion_holds: bool
    large_components: int
    centers_checked: int
    full_scan: bool
    failing_center: int | None = None


def uniqueness_check(geom: TorusGeom, occupied: np.ndarray, ell: int, full_scan: bool | None = None,
                     stats: ComponentStats | None = None) -> UniquenessReport:
    """Check the two local hypotheses and the global conclusion (exactly one vacant
    component of diameter >= ell) of the uniqueness criterion.

    Balls whose side 2r+1 reaches N are the whole torus. Diameters are torus
    l-infinity diameters. All centres are scanned when N <= 32 (or when
    ``full_scan``), otherwise a grid of stride ell.
    """
    if ell < 1 or 10 * ell > geom.N:
        raise ValueError("need 1 <= ell <= N/10")
    occ = np.asarray(occupied, dtype=np.bool_).ravel()
    vac = ~occ
    stats = stats or label_torus(geom, occ, winding=False)
    large = int(np.count_nonzero(stats.diameters >= ell))
    conclusion = large == 1
    if full_scan is None:
        full_scan = geom.N <= 32
    axis = np.arange(0, geom.N, 1 if full_scan else ell)
    centers = np.stack([m.ravel() for m in np.meshgrid(*([axis] * geom.d), indexing="ij")], axis=1)
    N, d = geom.N, geom.d
    r1, r2 = 2 * ell, 6 * ell
    whole2 = 2 * r2 + 1 >= N
    h1 = True
    failing = None
    for c in centers:
        if not _ball_has_large(vac, N, d, c.astype(np.int64), r1, ell):
            h1 = False
            failing = geom.index(c)
            break
    h2 = True
    if whole2:
        h2 = large <= 1
    else:
        for c in centers:
            if not _ball_large_labels(vac, stats.labels, N, d, c.astype(np.int64), r2, ell):
                h2 = False
                if failing is None:
                    failing = geom.index(c)
                break
    return UniquenessReport(hypotheses_hold=h1 and h2, hypothesis1=h1, hypothesis2=h2, conclusion_holds=conclusion,
                            large_components=large, centers_checked=len(centers), full_scan=full_scan,
                            failing_center=failing)
