"""Simple random walk on the torus: traces, excursions, continuous time."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numba as nb
import numpy as np

from .lattice import TorusGeom
from .rng import DirectionFeed, stream

DEFAULT_MAX_STEPS = 4_000_000_000

Start = Union[int, str]


class WalkBudgetError(RuntimeError):
    pass


@dataclass(frozen=True)
class WalkConfig:
    geom: TorusGeom
    steps: int
    start: Start = "uniform"
    seed: int = 0
    continuous_time: bool = False
    max_steps: int = DEFAULT_MAX_STEPS

    def __post_init__(self):
        if self.steps < 0:
            raise ValueError("steps must be >= 0")
        if isinstance(self.start, str) and self.start != "uniform":
            raise ValueError(f"start must be a site index or 'uniform', got {self.start!r}")


@dataclass
class VisitedMask:
    geom: TorusGeom
    bits: np.ndarray  # bool, length N^d
    steps: int
    visited: int = field(default=-1)

    def __post_init__(self):
        if self.visited < 0:
            self.visited = int(np.count_nonzero(self.bits))

    def packed(self) -> np.ndarray:
        return np.packbits(self.bits, bitorder="little")

    def grid(self) -> np.ndarray:
        return self.bits.reshape(self.geom.shape)


@dataclass
class ExcursionRecord:
    R: np.ndarray  # return times (int64)
    U: np.ndarray  # end times as float, math.inf when unfinished at the horizon
    K_u: int
    horizon: int
    t_star: int
    path: np.ndarray | None = None

    @property
    def pairs(self) -> list[tuple[int, float]]:
        return [(int(r), float(u)) for r, u in zip(self.R, self.U)]


def regeneration_time(N: int) -> int:
    """ceil((N ln N)^2)."""
    return math.ceil((N * math.log(N)) ** 2)


def start_site(geom: TorusGeom, start: Start, seed: int) -> int:
    if start == "uniform":
        return int(stream(seed, "start").integers(geom.total))
    s = int(start)
    if not 0 <= s < geom.total:
        raise ValueError(f"start site {s} out of range")
    return s


@nb.njit(cache=True)
def _trace_chunk(state, coords, bits, dirs, N, strides, steps):
    # state = [index, steps_done, distinct]
    idx = state[0]
    done = state[1]
    distinct = state[2]
    i = 0
    n = dirs.shape[0]
    while done < steps and i < n:
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
        if not bits[idx]:
            bits[idx] = True
            distinct += 1
        done += 1
    state[0] = idx
    state[1] = done
    state[2] = distinct


def _run_trace(geom: TorusGeom, start: int, steps: int, seed: int) -> VisitedMask:
    bits = np.zeros(geom.total, dtype=np.bool_)
    bits[start] = True
    coords = geom.coords(start).copy()
    strides = np.asarray(geom.strides, dtype=np.int64)
    state = np.array([start, 0, 1], dtype=np.int64)
    feed = DirectionFeed(stream(seed, "steps"), geom.d)
    while state[1] < steps:
        _trace_chunk(state, coords, bits, feed.next(), geom.N, strides, steps)
    return VisitedMask(geom, bits, steps, int(state[2]))


def walk_trace(cfg: WalkConfig) -> VisitedMask:
    """Set of sites {X_0, ..., X_steps} visited by the discrete-time walk.

    The start (when uniform) and the step directions come from independent
    sub-streams of ``cfg.seed``; with ``continuous_time`` the number of jumps
    is Poisson(steps) and the trace is the discrete trace of that many jumps.
    """
    steps = cfg.steps
    if cfg.continuous_time:
        steps = int(stream(cfg.seed, "clock").poisson(cfg.steps))
    if steps > cfg.max_steps:
        raise WalkBudgetError(f"{steps} steps exceed the configured budget of {cfg.max_steps}")
    start = start_site(cfg.geom, cfg.start, cfg.seed)
    return _run_trace(cfg.geom, start, steps, cfg.seed)


def ct_walk(geom: TorusGeom, t_end: float, seed: int, start: Start = "uniform") -> tuple[VisitedMask, int]:
    """Continuous-time walk Y_t = X_{N_t} up to real time ``t_end``; returns (trace, jump count)."""
    if t_end < 0:
        raise ValueError("t_end must be >= 0")
    jumps = int(stream(seed, "clock").poisson(t_end))
    mask = _run_trace(geom, start_site(geom, start, seed), jumps, seed)
    return mask, jumps


@nb.njit(cache=True)
def _excursion_chunk(state, coords, dirs, N, strides, horizon, t_star, in_A, in_B, R_out, U_out, path):
    # state = [index, t, last_in_B, in_exc, n_exc]
    idx = state[0]
    t = state[1]
    last_b = state[2]
    in_exc = state[3]
    n_exc = state[4]
    record = path.shape[0] > 0
    i = 0
    n = dirs.shape[0]
    while t < horizon and i < n:
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
        if record:
            path[t] = idx
        if in_B[idx]:
            last_b = t
        if in_exc == 1:
            if t - last_b > t_star:
                U_out[n_exc - 1] = t
                in_exc = 0
        elif in_A[idx]:
            R_out[n_exc] = t
            n_exc += 1
            in_exc = 1
    state[0] = idx
    state[1] = t
    state[2] = last_b
    state[3] = in_exc
    state[4] = n_exc


def excursions(
    geom: TorusGeom,
    A: np.ndarray,
    B: np.ndarray,
    t_star: int | None = None,
    horizon: int = 0,
    seed: int = 0,
    start: Start = "uniform",
    record_path: bool = False,
) -> ExcursionRecord:
    """Return times R_k (entrance into A) and end times U_k of successive excursions.

    U_k is the first time t >= R_k + t_star such that the walk avoided B
    during the whole window [t - t_star, t]. Excursions still running at the
    horizon get U_k = inf.
    """
    A = np.asarray(A, dtype=np.int64)
    B = np.asarray(B, dtype=np.int64)
    if t_star is None:
        t_star = regeneration_time(geom.N)
    if t_star <= 0:
        raise ValueError("t_star must be positive")
    in_A = np.zeros(geom.total, dtype=np.bool_)
    in_B = np.zeros(geom.total, dtype=np.bool_)
    in_A[A] = True
    in_B[B] = True
    if np.any(in_A & ~in_B):
        raise ValueError("A must be a subset of B")

    x0 = start_site(geom, start, seed)
    max_k = horizon // (t_star + 1) + 2
    R_out = np.full(max_k, -1, dtype=np.int64)
    U_out = np.full(max_k, -1, dtype=np.int64)
    path = np.empty(horizon + 1 if record_path else 0, dtype=np.int64)
    if record_path:
        path[0] = x0
    n_exc = 0
    if in_A[x0]:
        R_out[0] = 0
        n_exc = 1
    state = np.array([x0, 0, 0 if in_B[x0] else -t_star - 1, n_exc, n_exc], dtype=np.int64)
    coords = geom.coords(x0).copy()
    strides = np.asarray(geom.strides, dtype=np.int64)
    feed = DirectionFeed(stream(seed, "steps"), geom.d)
    while state[1] < horizon:
        _excursion_chunk(state, coords, feed.next(), geom.N, strides, horizon, t_star,
                         in_A, in_B, R_out, U_out, path)
    k = int(state[4])
    R = R_out[:k].copy()
    U = U_out[:k].astype(np.float64)
    U[U < 0] = math.inf
    return ExcursionRecord(R=R, U=U, K_u=int(np.count_nonzero(R <= horizon)), horizon=horizon,
                           t_star=int(t_star), path=path if record_path else None)
