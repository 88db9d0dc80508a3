"""Geometry of the discrete torus (Z/NZ)^d and of local Z^d charts.

Sites are flat row-major indices: ``index = sum_i x_i * N**(d-1-i)``.
Points of Z^d are plain integer tuples / ``(M, d)`` int64 arrays.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Sequence

import numpy as np

# Largest site count we accept; indices are int64 and labels are int32.
MAX_SITES = 2**31 - 1


@dataclass(frozen=True)
class TorusGeom:
    d: int
    N: int
    total: int = field(init=False)
    strides: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if self.d < 3:
            raise ValueError(f"dimension must be >= 3, got d={self.d}")
        if self.N < 4:
            raise ValueError(f"side length must be >= 4, got N={self.N}")
        total = self.N**self.d
        if total > MAX_SITES:
            raise ValueError(f"N^d = {total} exceeds the site-index width ({MAX_SITES})")
        object.__setattr__(self, "total", total)
        object.__setattr__(self, "strides", tuple(self.N ** (self.d - 1 - i) for i in range(self.d)))

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.d

    def index(self, coords) -> np.ndarray | int:
        """Site index of coordinates (reduced mod N). Accepts one point or an (M, d) array."""
        c = np.asarray(coords, dtype=np.int64)
        if c.shape[-1] != self.d:
            raise ValueError(f"expected {self.d} coordinates, got shape {c.shape}")
        idx = (np.mod(c, self.N) * np.asarray(self.strides, dtype=np.int64)).sum(axis=-1)
        return int(idx) if idx.ndim == 0 else idx

    def coords(self, sites) -> np.ndarray:
        s = np.asarray(sites, dtype=np.int64)
        if np.any(s < 0) or np.any(s >= self.total):
            raise ValueError("site index out of range")
        return np.stack(np.unravel_index(s, self.shape), axis=-1).astype(np.int64)

    def neighbor_table(self) -> np.ndarray:
        """``(N^d, 2d)`` table; column ``2a`` is the +e_a neighbour, ``2a+1`` the -e_a one."""
        grid = np.arange(self.total, dtype=np.int64).reshape(self.shape)
        cols = []
        for a in range(self.d):
            cols.append(np.roll(grid, -1, axis=a).ravel())
            cols.append(np.roll(grid, 1, axis=a).ravel())
        return np.stack(cols, axis=1)


def _check_dim(p, d: int) -> np.ndarray:
    arr = np.asarray(p, dtype=np.int64)
    if arr.shape[-1] != d:
        raise ValueError(f"dimension mismatch: point has {arr.shape[-1]} coordinates, geometry has d={d}")
    return arr


def project(p, geom: TorusGeom) -> int:
    """Canonical projection Z^d -> T; returns the site index."""
    return geom.index(_check_dim(p, geom.d))


def wrap_offset(delta, N: int) -> np.ndarray:
    """Reduce coordinate differences to the representative in (-N/2, N/2]."""
    r = np.mod(np.asarray(delta, dtype=np.int64), N)
    return np.where(r > N // 2, r - N, r)


def torus_distance(x: int, y: int, geom: TorusGeom) -> int:
    """l-infinity distance on the torus."""
    diff = wrap_offset(geom.coords(y) - geom.coords(x), geom.N)
    return int(np.abs(diff).max())


def chart(center: int, q: int, geom: TorusGeom) -> tuple[int, ...]:
    """Local chart phi_center: the unique p with ||p|| <= N/4 and Pi(center + p) = q."""
    p = wrap_offset(geom.coords(q) - geom.coords(center), geom.N)
    if np.abs(p).max() * 4 > geom.N:
        raise ValueError(f"site {q} lies outside B(center, N/4)")
    return tuple(int(v) for v in p)


def unchart(center: int, p, geom: TorusGeom) -> int:
    """Inverse of :func:`chart`: the site Pi(center + p)."""
    return geom.index(geom.coords(center) + _check_dim(p, geom.d))


def box_points(r: int, d: int) -> np.ndarray:
    """All points of the Z^d ball B(0, r), row-major order, as an (M, d) array."""
    if r < 0:
        raise ValueError("radius must be >= 0")
    axis = np.arange(-r, r + 1, dtype=np.int64)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def linf_ball(center, r: int, geom: TorusGeom | None = None, d: int | None = None) -> np.ndarray:
    """Closed l-infinity ball.

    Torus mode (``geom`` given): sorted site indices; requires ``2r+1 <= N``.
    Z^d mode (``d`` given): ``(M, d)`` array of points around ``center``.
    """
    if r < 0:
        raise ValueError("radius must be >= 0")
    if geom is not None:
        if 2 * r + 1 > geom.N:
            raise ValueError(f"ball of radius {r} wraps onto itself on a torus of side {geom.N}")
        c = geom.coords(center) if np.ndim(center) == 0 else _check_dim(center, geom.d)
        return np.sort(geom.index(box_points(r, geom.d) + c))
    if d is None:
        raise ValueError("need either a torus geometry or a dimension")
    return box_points(r, d) + _check_dim(center, d)


def neighbors(site: int, geom: TorusGeom) -> list[int]:
    c = geom.coords(site)
    out = []
    for a in range(geom.d):
        for step in (1, -1):
            n = c.copy()
            n[a] += step
            out.append(geom.index(n))
    return out


def star_offsets(d: int) -> np.ndarray:
    """The 3^d - 1 offsets at l-infinity distance exactly one."""
    offs = [o for o in product((-1, 0, 1), repeat=d) if any(o)]
    return np.asarray(offs, dtype=np.int64)


def nn_offsets(d: int) -> np.ndarray:
    offs = np.zeros((2 * d, d), dtype=np.int64)
    for a in range(d):
        offs[2 * a, a] = 1
        offs[2 * a + 1, a] = -1
    return offs


def inner_boundary(points: np.ndarray) -> np.ndarray:
    """Points of a finite Z^d set having a nearest neighbour outside the set (sorted rows)."""
    pts = np.unique(np.asarray(points, dtype=np.int64), axis=0)
    d = pts.shape[1]
    members = {tuple(p) for p in pts.tolist()}
    keep = []
    for p in pts.tolist():
        for off in nn_offsets(d).tolist():
            if tuple(a + b for a, b in zip(p, off)) not in members:
                keep.append(p)
                break
    return np.asarray(keep, dtype=np.int64).reshape(-1, d)


def linf_radius(points: Sequence) -> int:
    pts = np.asarray(points, dtype=np.int64)
    return int(np.abs(pts).max()) if pts.size else 0


def linf_diameter(points: Sequence) -> int:
    pts = np.asarray(points, dtype=np.int64)
    if pts.size == 0:
        return 0
    return int((pts.max(axis=0) - pts.min(axis=0)).max())
