"""Discrete potential theory on Z^d.

Harmonic measures are computed by red-black SOR on the box B(0, R) with the
target set held at 1 and the outside of the box at a constant. Escape
probabilities from a finite box are extrapolated in R^(2-d) to R = infinity.
Monte Carlo estimators kill walks at a finite radius and (optionally) correct
for the possibility of returning, using the asymptotic lattice Green function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .lattice import TorusGeom, box_points, chart, inner_boundary, linf_diameter, linf_radius, nn_offsets
from .rng import DirectionFeed, stream


class HarmonicConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(msg)
        self.residual = residual


class ExtrapolationError(RuntimeError):
    pass


def as_points(A, d: int | None = None) -> np.ndarray:
    pts = np.asarray(A, dtype=np.int64)
    if pts.ndim == 1:
        pts = pts.reshape(1, -1)
    if d is not None and pts.shape[1] != d:
        raise ValueError(f"points have dimension {pts.shape[1]}, expected {d}")
    return np.unique(pts, axis=0)


def _reflection_symmetric(pts: np.ndarray) -> bool:
    s = {tuple(p) for p in pts.tolist()}
    for a in range(pts.shape[1]):
        flipped = pts.copy()
        flipped[:, a] *= -1
        if {tuple(p) for p in flipped.tolist()} != s:
            return False
    return True


def _permutation_symmetric(pts: np.ndarray) -> bool:
    s = {tuple(p) for p in pts.tolist()}
    for a in range(pts.shape[1] - 1):
        swapped = pts.copy()
        swapped[:, [a, a + 1]] = swapped[:, [a + 1, a]]
        if {tuple(p) for p in swapped.tolist()} != s:
            return False
    return True


# --------------------------------------------------------------------------
# Harmonic solves
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def _sor_sweep(u, sites, offsets, omega, inv):
    res = 0.0
    for s in sites:
        acc = 0.0
        for o in offsets:
            acc += u[s + o]
        r = acc * inv - u[s]
        if abs(r) > res:
            res = abs(r)
        u[s] += omega * r
    return res


@nb.njit(cache=True)
def _copy_ghosts(u, ghosts, sources):
    for i in range(ghosts.shape[0]):
        u[ghosts[i]] = u[sources[i]]


@nb.njit(cache=True)
def _residual(u, sites, offsets, inv):
    res = 0.0
    for s in sites:
        acc = 0.0
        for o in offsets:
            acc += u[s + o]
        r = abs(acc * inv - u[s])
        if r > res:
            res = r
    return res


@dataclass
class HarmonicField:
    """h(y) ~ P_y[H_A < T_{B(0,R)}] (with outside value ``boundary``) on the box."""

    R: int
    d: int
    values: np.ndarray  # flattened grid including one layer beyond B(0, R)
    lo: int  # coordinate of the first grid layer (-R-1, or -1 for the orthant grid)
    n: int  # grid points per axis
    symmetric: bool
    boundary: float | str
    residual: float
    sweeps: int

    def at(self, points) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=np.int64))
        if np.any(np.abs(pts).max(axis=1) > self.R + 1):
            raise ValueError("points outside the solved box")
        if self.symmetric:
            pts = np.abs(pts)
        idx = ((pts - self.lo) * (self.n ** np.arange(self.d - 1, -1, -1))).sum(axis=1)
        return self.values[idx]

    def grid(self) -> np.ndarray:
        return self.values.reshape((self.n,) * self.d)


class _BoxGrid:
    """Index bookkeeping for red-black SOR on B(0, R) plus one outer layer."""

    def __init__(self, pts: np.ndarray, R: int, symmetric: bool):
        d = pts.shape[1]
        self.d, self.R, self.symmetric = d, R, symmetric
        self.lo = -1 if symmetric else -(R + 1)
        self.n = R + 2 - self.lo
        self.strides = self.n ** np.arange(d - 1, -1, -1)
        axis = np.arange(self.lo, R + 2, dtype=np.int32)
        coords = np.stack([m.ravel() for m in np.meshgrid(*([axis] * d), indexing="ij")], axis=1)
        self.total = coords.shape[0]
        amax = np.abs(coords).max(axis=1)
        outer = amax == R + 1
        if symmetric:
            nonneg = (coords >= 0).all(axis=1)
            self.outer = np.flatnonzero(outer & nonneg)
        else:
            self.outer = np.flatnonzero(outer)
        self.outer_points = coords[self.outer].astype(np.int64)
        a_idx = ((pts - self.lo) * self.strides).sum(axis=1)
        if symmetric:
            a_idx = a_idx[(pts >= 0).all(axis=1)]
        self.a_idx = a_idx
        fixed = outer
        fixed[a_idx] = True
        ghost = (coords == -1).any(axis=1) if symmetric else np.zeros(self.total, dtype=bool)
        free = ~fixed & ~ghost
        parity = coords.sum(axis=1) & 1
        self.colors = [np.flatnonzero(free & (parity == c)) for c in (0, 1)]
        self.offsets = np.concatenate([self.strides, -self.strides]).astype(np.int64)
        if symmetric:
            g, src = [], []
            for a in range(d):
                m = (coords[:, a] == -1) & ((coords >= 0).sum(axis=1) == d - 1)
                gi = np.flatnonzero(m)
                g.append(gi)
                src.append(gi + 2 * self.strides[a])
            self.ghosts = np.concatenate(g).astype(np.int64)
            self.sources = np.concatenate(src).astype(np.int64)
        else:
            self.ghosts = np.empty(0, dtype=np.int64)
            self.sources = np.empty(0, dtype=np.int64)

    def solve(self, u: np.ndarray, tol: float, max_sweeps: int) -> tuple[float, int]:
        omega = 2.0 / (1.0 + math.sin(math.pi / (2 * self.R + 2)))
        inv = 1.0 / (2 * self.d)
        c0, c1 = self.colors
        _copy_ghosts(u, self.ghosts, self.sources)
        sweeps = 0
        while sweeps < max_sweeps:
            r0 = _sor_sweep(u, c0, self.offsets, omega, inv)
            _copy_ghosts(u, self.ghosts, self.sources)
            r1 = _sor_sweep(u, c1, self.offsets, omega, inv)
            _copy_ghosts(u, self.ghosts, self.sources)
            sweeps += 1
            if max(r0, r1) <= tol:
                res = max(_residual(u, c0, self.offsets, inv), _residual(u, c1, self.offsets, inv))
                if res <= tol:
                    return res, sweeps
        res = max(_residual(u, c0, self.offsets, inv), _residual(u, c1, self.offsets, inv))
        if res > tol:
            raise HarmonicConvergenceError(
                f"SOR did not reach residual {tol:g} within {max_sweeps} sweeps (achieved {res:.3g})", res)
        return res, sweeps

    def field(self, u, boundary, residual, sweeps) -> HarmonicField:
        return HarmonicField(R=self.R, d=self.d, values=u, lo=self.lo, n=self.n, symmetric=self.symmetric,
                             boundary=boundary, residual=float(residual), sweeps=sweeps)


def _prepare(A, R: int, symmetric: bool | None) -> tuple[np.ndarray, bool]:
    pts = as_points(A)
    if 2 * linf_radius(pts) > R:
        raise ValueError(f"A must lie in B(0, R/2); radius {linf_radius(pts)} vs R={R}")
    if symmetric is None:
        symmetric = _reflection_symmetric(pts)
    elif symmetric and not _reflection_symmetric(pts):
        raise ValueError("A is not reflection symmetric")
    return pts, bool(symmetric)


def harmonic_solve(A, R: int, boundary: float = 0.0, tol: float = 1e-10,
                   symmetric: bool | None = None, max_sweeps: int | None = None) -> HarmonicField:
    """Solve for the function that is 1 on A, ``boundary`` outside B(0, R) and harmonic in between.

    With boundary 0 this is h(y) = P_y[H_A < T_{B(0,R)}]. ``symmetric=None``
    detects reflection symmetry of A and then solves on the non-negative
    orthant with mirror ghost layers.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    pts, symmetric = _prepare(A, R, symmetric)
    grid = _BoxGrid(pts, R, symmetric)
    u = np.zeros(grid.total)
    u[grid.outer] = boundary
    u[grid.a_idx] = 1.0
    res, sweeps = grid.solve(u, tol, max_sweeps if max_sweeps is not None else 100 * R * R)
    return grid.field(u, boundary, res, sweeps)


# --------------------------------------------------------------------------
# Equilibrium measure and capacity
# --------------------------------------------------------------------------

@dataclass
class EquilibriumMeasure:
    points: np.ndarray  # the set A, (M, d)
    boundary: np.ndarray  # inner boundary of A, (K, d)
    weights: np.ndarray  # e_A on the boundary points
    capacity: float
    method: str  # "extrapolated" | "far-field" | "monte-carlo" | "golden"
    error: float
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def normalized(self) -> np.ndarray:
        return self.weights / self.weights.sum()

    def weight_of(self, point) -> float:
        p = np.asarray(point, dtype=np.int64)
        hit = np.flatnonzero((self.boundary == p).all(axis=1))
        return float(self.weights[hit[0]]) if hit.size else 0.0


def escape_within(field_: HarmonicField, A_pts: np.ndarray, boundary_pts: np.ndarray) -> np.ndarray:
    """P_x[T_{B(0,R)} < H~_A] for x on the inner boundary, from a field with boundary value 0."""
    d = A_pts.shape[1]
    members = {tuple(p) for p in A_pts.tolist()}
    out = np.empty(len(boundary_pts))
    offs = nn_offsets(d)
    for i, x in enumerate(boundary_pts):
        nbrs = x + offs
        outside = np.array([tuple(y) not in members for y in nbrs.tolist()])
        h = np.ones(len(nbrs))
        if outside.any():
            h[outside] = field_.at(nbrs[outside])
        out[i] = 1.0 - h.mean()
    return out


def default_radii(A) -> tuple[int, int]:
    pts = as_points(A)
    R1 = max(32, 4 * linf_diameter(pts), 2 * linf_radius(pts) + 2)
    return R1, 2 * R1


def farfield_radius(A) -> int:
    # the outer layer sits >= 16 sites from A in d = 3, where the asymptotic Green
    # function is good to ~1e-5; in d >= 4 the boundary values are small enough at 8
    pts = as_points(A)
    return 2 * linf_radius(pts) + (16 if pts.shape[1] == 3 else 8)


def _richardson(pts, bnd, R1, R2, tol):
    d = pts.shape[1]
    q1 = escape_within(harmonic_solve(pts, R1, tol=tol), pts, bnd)
    q2 = escape_within(harmonic_solve(pts, R2, tol=tol), pts, bnd)
    # q_R decreases in R: a larger box leaves more room to come back.
    if np.any(q2 > q1 + 10 * tol * R2 * R2):
        bad = int(np.argmax(q2 - q1))
        raise ExtrapolationError(
            f"escape probability increased with the radius at {bnd[bad].tolist()}: "
            f"q(R1={R1})={q1[bad]:.12g}, q(R2={R2})={q2[bad]:.12g}")
    s1, s2 = float(R1) ** (2 - d), float(R2) ** (2 - d)
    w = (q2 * s1 - q1 * s2) / (s1 - s2)
    cap = float(w.sum())
    meta = {"R1": R1, "R2": R2, "tol": tol, "cap_R1": float(q1.sum()), "cap_R2": float(q2.sum())}
    return w, abs(float(q2.sum()) - cap), meta


@nb.njit(cache=True)
def _green_field(ys, pts, w, d):
    out = np.empty(ys.shape[0])
    for i in range(ys.shape[0]):
        out[i] = _green_sum(ys[i], pts, w, d)
    return out


def _farfield_weights(pts, bnd, R, tol, max_iter=60, depth=5):
    """Escape probabilities with the outer layer held at sum_z G(y - z) e(z), iterated to a fixed point.

    The map e -> F(e) is affine and contracts slowly for large sets, so the
    iteration is accelerated by Anderson mixing over the last ``depth`` steps.
    """
    d = pts.shape[1]
    grid = _BoxGrid(pts, R, _reflection_symmetric(pts))
    u = np.zeros(grid.total)
    u[grid.a_idx] = 1.0
    budget = 100 * R * R
    ys = grid.outer_points.astype(np.float64)
    inverse = None
    if grid.symmetric and _permutation_symmetric(pts):
        # the field is invariant under signed permutations, so one evaluation per orbit suffices
        ys, inverse = np.unique(np.sort(np.abs(ys), axis=1), axis=0, return_inverse=True)
    bf = bnd.astype(np.float64)
    sweeps = 0

    def F(e):
        nonlocal sweeps
        vals = _green_field(ys, bf, e, d)
        u[grid.outer] = vals if inverse is None else vals[inverse.ravel()]
        res, s = grid.solve(u, tol, budget)
        sweeps += s
        return escape_within(grid.field(u, "far-field", res, sweeps), pts, bnd)

    e = F(np.zeros(len(bnd)))
    xs, gs = [], []
    for it in range(max_iter):
        fe = F(e)
        g = fe - e
        delta = float(np.abs(g).max())
        if delta <= 10 * tol:
            return fe, {"R": R, "iterations": it + 1, "sweeps": sweeps}
        xs.append(e)
        gs.append(g)
        if len(xs) > depth + 1:
            xs.pop(0)
            gs.pop(0)
        if len(xs) == 1:
            e = fe
            continue
        dG = np.stack([gs[i + 1] - gs[i] for i in range(len(gs) - 1)], axis=1)
        dX = np.stack([xs[i + 1] - xs[i] for i in range(len(xs) - 1)], axis=1)
        gamma = np.linalg.lstsq(dG, g, rcond=None)[0]
        e = e + g - (dX + dG) @ gamma
    raise ExtrapolationError(f"far-field boundary iteration did not settle at R={R} (last change {delta:.3g})")


def equilibrium(A, R1: int | None = None, R2: int | None = None, tol: float = 1e-10,
                method: str = "richardson") -> EquilibriumMeasure:
    """Equilibrium measure e_A(x) = P_x[no return to A] and cap(A) = sum of e_A.

    ``method="richardson"``: escape probabilities to distance R1 and R2 are
    extrapolated linearly in R^(2-d); the error is |cap at R2 - extrapolated|.

    ``method="farfield"``: the box boundary is held at the far-field value
    sum_z G(y - z) e_A(z) of the current estimate and the solve is repeated
    until e_A stops changing. This removes the truncation error; the error
    reported is the change in capacity between radii R1 and R2.
    """
    pts = as_points(A)
    bnd = inner_boundary(pts)
    if method == "richardson":
        if R1 is None or R2 is None:
            dr1, dr2 = default_radii(pts)
            R1 = R1 or dr1
            R2 = R2 or dr2
        if not R1 < R2:
            raise ValueError("need R1 < R2")
        w, err, meta = _richardson(pts, bnd, R1, R2, tol)
        tag = "extrapolated"
    elif method == "farfield":
        if R2 is None:
            R2 = max(farfield_radius(pts), (R1 or 0) + 8)
        if R1 is None:
            R1 = R2 - (8 if pts.shape[1] == 3 else 4)
        if not R1 < R2:
            raise ValueError("need R1 < R2")
        w1, m1 = _farfield_weights(pts, bnd, R1, tol)
        w, m2 = _farfield_weights(pts, bnd, R2, tol)
        err = abs(float(w.sum() - w1.sum()))
        meta = {"R1": R1, "R2": R2, "tol": tol, "cap_R1": float(w1.sum()), "cap_R2": float(w.sum()),
                "iterations": m2["iterations"]}
        tag = "far-field"
    else:
        raise ValueError(f"unknown method {method!r}")
    return EquilibriumMeasure(points=pts, boundary=bnd, weights=w, capacity=float(w.sum()), method=tag,
                              error=err, meta=meta)


# --------------------------------------------------------------------------
# Lattice Green function (far field)
# --------------------------------------------------------------------------

def green_asymptotic(x: np.ndarray) -> np.ndarray:
    """Large-|x| expansion of the Green function sum_n P_0[X_n = x] of simple random walk on Z^d.

    d = 3 includes the cubic-anisotropy correction; other dimensions use the
    leading term only. In d = 3 the relative error is ~1e-4 at |x| = 10 and ~1e-5 at |x| = 16.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    d = x.shape[1]
    r2 = (x * x).sum(axis=1)
    r = np.sqrt(r2)
    if d == 3:
        quart = (x**4).sum(axis=1) / (r2 * r2)
        return 3.0 / (2.0 * np.pi * r) + 3.0 / (16.0 * np.pi * r**3) * (5.0 * quart - 3.0)
    const = d * math.gamma(d / 2 - 1) / (2.0 * np.pi ** (d / 2))
    return const * r ** (2 - d)


@nb.njit(cache=True)
def _green_sum(y, pts, w, d):
    # sum_z G(y - z) w(z) with the asymptotic Green function
    tot = 0.0
    if d == 3:
        c1 = 3.0 / (2.0 * np.pi)
        c3 = 3.0 / (16.0 * np.pi)
        for j in range(pts.shape[0]):
            x0 = y[0] - pts[j, 0]
            x1 = y[1] - pts[j, 1]
            x2 = y[2] - pts[j, 2]
            r2 = x0 * x0 + x1 * x1 + x2 * x2
            r = math.sqrt(r2)
            q = (x0**4 + x1**4 + x2**4) / (r2 * r2)
            tot += w[j] * (c1 / r + c3 / (r * r2) * (5.0 * q - 3.0))
    else:
        const = d * math.gamma(d / 2 - 1) / (2.0 * np.pi ** (d / 2))
        for j in range(pts.shape[0]):
            r2 = 0.0
            for a in range(d):
                t = y[a] - pts[j, a]
                r2 += t * t
            tot += w[j] * const * r2 ** ((2 - d) / 2.0)
    return tot


# --------------------------------------------------------------------------
# Monte Carlo capacity
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def _escape_walks(state, pos, dirs, member, rad, R_kill, n_walks, exits, succ):
    # state = [walk_index, unused, start point...]; pos = current point; member = bool cube over B(0, rad)
    d = pos.shape[0]
    side = 2 * rad + 1
    i = 0
    n = dirs.shape[0]
    w = state[0]
    while w < n_walks and i < n:
        k = dirs[i]
        i += 1
        a = k >> 1
        if k & 1:
            pos[a] -= 1
        else:
            pos[a] += 1
        inside = True
        far = 0
        idx = 0
        for b in range(d):
            c = pos[b]
            ac = c if c >= 0 else -c
            if ac > far:
                far = ac
            if ac > rad:
                inside = False
            else:
                idx = idx * side + (c + rad)
        if inside and member[idx]:
            succ[w] = 0
            w += 1
            for b in range(d):
                pos[b] = state[2 + b]
        elif far >= R_kill:
            succ[w] = 1
            for b in range(d):
                exits[w, b] = pos[b]
                pos[b] = state[2 + b]
            w += 1
    state[0] = w


def _membership_cube(pts: np.ndarray) -> tuple[np.ndarray, int]:
    rad = linf_radius(pts)
    d = pts.shape[1]
    side = 2 * rad + 1
    member = np.zeros(side**d, dtype=np.bool_)
    member[((pts + rad) * side ** np.arange(d - 1, -1, -1)).sum(axis=1)] = True
    return member, rad


def escape_samples(A, x, R_kill: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """n walks from x (in A); returns (success flags, exit points) for reaching ||.|| = R_kill before returning."""
    pts = as_points(A)
    d = pts.shape[1]
    member, rad = _membership_cube(pts)
    x = np.asarray(x, dtype=np.int64)
    state = np.zeros(2 + d, dtype=np.int64)
    state[2:] = x
    pos = x.copy()
    exits = np.zeros((n, d), dtype=np.int64)
    succ = np.zeros(n, dtype=np.int8)
    feed = DirectionFeed(rng, d)
    while state[0] < n:
        _escape_walks(state, pos, feed.next(), member, rad, R_kill, n, exits, succ)
    return succ.astype(bool), exits


def capacity_mc(A, R_kill: int = 64, n: int = 10_000, seed: int = 0,
                far_field: str = "green") -> tuple[float, float]:
    """Monte Carlo capacity from n escape attempts per boundary point.

    ``far_field="none"`` is the plain estimator sum_x P_x[reach R_kill before
    returning], biased upward by O((diam A / R_kill)^(d-2)). ``"green"``
    removes that bias: with M(x, z) = E_x[1{escape} G(Y_T - z)] the
    equilibrium measure solves e = q - M e.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if far_field not in ("green", "none"):
        raise ValueError(f"unknown far_field mode {far_field!r}")
    pts = as_points(A)
    if 4 * linf_radius(pts) > R_kill:
        raise ValueError("A must lie in B(0, R_kill/4)")
    bnd = inner_boundary(pts)
    k = len(bnd)
    q = np.empty(k)
    M = np.zeros((k, k))
    for i, x in enumerate(bnd):
        succ, exits = escape_samples(pts, x, R_kill, n, stream(seed, "capacity_mc", i))
        q[i] = succ.mean()
        if far_field == "green" and succ.any():
            ys = exits[succ].astype(np.float64)
            for j, z in enumerate(bnd):
                M[i, j] = green_asymptotic(ys - z).sum() / n
    var = q * (1 - q) / n
    if far_field == "none":
        return float(q.sum()), float(math.sqrt(var.sum()))
    e = np.linalg.solve(np.eye(k) + M, q)
    # first-order propagation of the binomial noise through (I + M)^-1
    grad = np.linalg.solve((np.eye(k) + M).T, np.ones(k))
    return float(e.sum()), float(math.sqrt((grad**2 * var).sum()))


# --------------------------------------------------------------------------
# Mean hitting time on the torus
# --------------------------------------------------------------------------

@nb.njit(cache=True)
def _hitting_walks(state, coords, dirs, N, strides, inV, starts, times, where):
    # state = [walk_index, site, t]
    d = coords.shape[0]
    n_walks = starts.shape[0]
    w = state[0]
    idx = state[1]
    t = state[2]
    i = 0
    n = dirs.shape[0]
    while w < n_walks:
        if inV[idx]:
            times[w] = t
            where[w] = idx
            w += 1
            if w == n_walks:
                break
            idx = starts[w]
            t = 0
            rem = idx
            for b in range(d):
                coords[b] = rem // strides[b]
                rem -= coords[b] * strides[b]
            continue
        if i == n:
            break
        k = dirs[i]
        i += 1
        a = k >> 1
        c = coords[a]
        if k & 1:
            if c == 0:
                coords[a] = N - 1
                idx += (N - 1) * strides[a]
            else:
                coords[a] = c - 1
                idx -= strides[a]
        else:
            if c == N - 1:
                coords[a] = 0
                idx -= (N - 1) * strides[a]
            else:
                coords[a] = c + 1
                idx += strides[a]
        t += 1
    state[0] = w
    state[1] = idx
    state[2] = t


def hitting_sites(geom: TorusGeom, V, starts: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Entrance times of V (discrete steps) and entrance sites for walks from the given start sites."""
    starts = np.asarray(starts, dtype=np.int64)
    inV = np.zeros(geom.total, dtype=np.bool_)
    inV[np.asarray(V, dtype=np.int64)] = True
    if not inV.any():
        raise ValueError("V is empty")
    times = np.zeros(len(starts), dtype=np.int64)
    where = np.zeros(len(starts), dtype=np.int64)
    if len(starts) == 0:
        return times, where
    strides = np.asarray(geom.strides, dtype=np.int64)
    coords = geom.coords(starts[0]).copy()
    state = np.array([0, starts[0], 0], dtype=np.int64)
    feed = DirectionFeed(rng, geom.d)
    while state[0] < len(starts):
        _hitting_walks(state, coords, feed.next(), geom.N, strides, inV, starts, times, where)
    return times, where


def hitting_times(geom: TorusGeom, V, starts: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Entrance times of V for walks from the given start sites (discrete steps)."""
    return hitting_sites(geom, V, starts, rng)[0]


@dataclass
class MeanHitting:
    H_bar: float
    stderr: float
    gloc_ratio: float
    capacity: float
    n: int


def mean_hitting(geom: TorusGeom, V, n: int, seed: int = 0, capacity: float | None = None) -> MeanHitting:
    """Sample mean of H_V from uniform starts and the ratio N^d / (E[H_V] cap(V))."""
    V = np.unique(np.asarray(V, dtype=np.int64))
    starts = stream(seed, "mean_hitting", "starts").integers(geom.total, size=n)
    times = hitting_times(geom, V, starts, stream(seed, "mean_hitting", "steps"))
    H_bar = float(times.mean())
    stderr = float(times.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    if H_bar == 0.0:
        return MeanHitting(H_bar, stderr, math.nan, math.nan, n)
    if capacity is None:
        zd = np.array([chart(0, v, geom) for v in V], dtype=np.int64)
        from .golden import lookup_equilibrium
        capacity = lookup_equilibrium(zd).capacity
    return MeanHitting(H_bar, stderr, geom.total / (H_bar * capacity), float(capacity), n)
