"""Random interlacements restricted to a box.

Inside A = B(0, r) the interlacement at level u is the union of the ranges of
J ~ Poisson(u cap(A)) independent walks started from the normalized
equilibrium measure of A. Walks are followed until they reach distance
``R_kill``. In ``"kill"`` mode they stop there, which misses later returns
to A. In ``"reinsert"`` mode (the default) a walk at y on the kill shell
comes back with probability h(y) = sum_z G(y - z) e_A(z) and re-enters at a
point drawn again from the normalized equilibrium measure; this removes the
truncation bias up to the (small) difference between the entrance law from
y and e_A / cap(A).

Samples are generated in blocks of ``BLOCK`` consecutive samples; block b
draws from ``stream(seed, "interlace", b, ...)`` so results do not depend on
how blocks are spread over workers.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numba as nb
import numpy as np

from .components import ComponentStats, label_components
from .golden import lookup_equilibrium
from .lattice import box_points, linf_radius
from .potential import EquilibriumMeasure, _green_sum, as_points, equilibrium
from .rng import stream

BLOCK = 1000
_DIR_CHUNK = 1 << 18
_AUX_CHUNK = 1 << 12

MODES = ("reinsert", "kill")


def default_kill_radius(r: int, far_field: str = "reinsert") -> int:
    if far_field == "kill":
        return max(8 * r, 64)
    return max(4 * r, 2 * r + 16, 32)


@dataclass
class InterlacementSample:
    r: int
    u: float
    d: int
    J: int
    trace: np.ndarray  # bool over B(0, r), row-major
    seed: int
    walk_traces: np.ndarray | None = None  # (J, (2r+1)^d) bool, when requested

    def trace_points(self) -> np.ndarray:
        return box_points(self.r, self.d)[self.trace]

    def grid(self) -> np.ndarray:
        return self.trace.reshape((2 * self.r + 1,) * self.d)


@nb.njit(cache=True)
def _box_index(pos, r):
    side = 2 * r + 1
    idx = 0
    for a in range(pos.shape[0]):
        c = pos[a]
        if c > r or c < -r:
            return -1
        idx = idx * side + (c + r)
    return idx


@nb.njit(cache=True)
def _interlace_kernel(st, pos, dirs, unif, starts, J, bpts, bpts_f, bw, r, R_kill, reinsert,
                      vbits, full, hits, trace, walk_traces):
    # st = [sample, walk, active, i_dir, i_unif, i_start]
    # returns 0 when all samples are done, 1/2/3 when dirs/unif/starts ran out
    d = pos.shape[0]
    n_samples = J.shape[0]
    s = st[0]
    j = st[1]
    active = st[2]
    idir = st[3]
    iun = st[4]
    ist = st[5]
    code = 0
    record = trace.shape[0] > 0
    per_walk = walk_traces.shape[0] > 0
    while s < n_samples:
        if active == 0:
            if j >= J[s] or (full != 0 and hits[s] == full):
                s += 1
                j = 0
                continue
            if ist == starts.shape[0]:
                code = 3
                break
            k = starts[ist]
            ist += 1
            for a in range(d):
                pos[a] = bpts[k, a]
            active = 1
            idx = _box_index(pos, r)
            hits[s] |= vbits[idx]
            if record:
                trace[idx] = True
            if per_walk:
                walk_traces[j, idx] = True
            continue
        far = 0
        for a in range(d):
            c = pos[a] if pos[a] >= 0 else -pos[a]
            if c > far:
                far = c
        if far >= R_kill:
            if reinsert:
                if iun == unif.shape[0]:
                    code = 2
                    break
                y = np.empty(d)
                for a in range(d):
                    y[a] = pos[a]
                h = _green_sum(y, bpts_f, bw, d)
                back = unif[iun] < h
                iun += 1
                active = 0
                if not back:
                    j += 1
            else:
                active = 0
                j += 1
            continue
        if idir == dirs.shape[0]:
            code = 1
            break
        kd = dirs[idir]
        idir += 1
        a = kd >> 1
        if kd & 1:
            pos[a] -= 1
        else:
            pos[a] += 1
        idx = _box_index(pos, r)
        if idx >= 0:
            hits[s] |= vbits[idx]
            if record:
                trace[idx] = True
            if per_walk:
                walk_traces[j, idx] = True
    st[0] = s
    st[1] = j
    st[2] = active
    st[3] = idir
    st[4] = iun
    st[5] = ist
    return code


class _BlockRunner:
    """Sequential sampler over the ``BLOCK`` samples of one block."""

    def __init__(self, eq: EquilibriumMeasure, r: int, u: float, R_kill: int, reinsert: bool, seed: int,
                 block: int):
        self.eq, self.r, self.R_kill, self.reinsert = eq, r, R_kill, reinsert
        self.J = stream(seed, "interlace", block, "J").poisson(u * eq.capacity, size=BLOCK).astype(np.int64)
        self.dir_rng = stream(seed, "interlace", block, "dirs")
        self.unif_rng = stream(seed, "interlace", block, "unif")
        self.start_rng = stream(seed, "interlace", block, "starts")
        cum = np.cumsum(eq.weights / eq.weights.sum())
        cum[-1] = 1.0
        self.cum = cum
        self.bpts = eq.boundary.astype(np.int64)
        self.bpts_f = eq.boundary.astype(np.float64)
        self.size = (2 * r + 1) ** eq.d
        self.st = np.zeros(6, dtype=np.int64)
        self.pos = np.zeros(eq.d, dtype=np.int64)
        self.dirs = self._dirs()
        self.unif = self.unif_rng.random(_AUX_CHUNK)
        self.starts = self._starts()
        self.done = 0
        self._zero_bits = np.zeros(self.size, dtype=np.uint64)

    def _dirs(self):
        return self.dir_rng.integers(0, 2 * self.eq.d, size=_DIR_CHUNK, dtype=np.uint8)

    def _starts(self):
        return np.searchsorted(self.cum, self.start_rng.random(_AUX_CHUNK), side="right").astype(np.int64)

    def _run(self, J, vbits, full, hits, trace, walk_traces):
        st = self.st
        st[0] = st[1] = st[2] = 0
        while True:
            code = _interlace_kernel(st, self.pos, self.dirs, self.unif, self.starts, J, self.bpts, self.bpts_f,
                                     self.eq.weights, self.r, self.R_kill, self.reinsert, vbits,
                                     np.uint64(full), hits, trace, walk_traces)
            if code == 0:
                return
            if code == 1:
                self.dirs, st[3] = self._dirs(), 0
            elif code == 2:
                self.unif, st[4] = self.unif_rng.random(_AUX_CHUNK), 0
            else:
                self.starts, st[5] = self._starts(), 0

    def hits(self, n: int, vbits: np.ndarray, full: int) -> np.ndarray:
        """Bit masks of the sets hit by the next n samples; stops a sample once every set is hit."""
        J = self.J[self.done:self.done + n]
        hits = np.zeros(len(J), dtype=np.uint64)
        self._run(J, vbits, full, hits, np.zeros(0, dtype=np.bool_), np.zeros((0, 0), dtype=np.bool_))
        self.done += len(J)
        return hits

    def next_trace(self, record_walks: bool = False) -> tuple[int, np.ndarray, np.ndarray | None]:
        J = self.J[self.done:self.done + 1]
        trace = np.zeros(self.size, dtype=np.bool_)
        walks = np.zeros((int(J[0]), self.size) if record_walks else (0, 0), dtype=np.bool_)
        self._run(J, self._zero_bits, 0, np.zeros(1, dtype=np.uint64), trace, walks)
        self.done += 1
        return int(J[0]), trace, walks if record_walks else None


def _check(r: int, u: float, R_kill: int, far_field: str):
    if u < 0:
        raise ValueError("u must be >= 0")
    if r < 1:
        raise ValueError("box radius must be >= 1")
    if R_kill < 4 * r:
        raise ValueError(f"R_kill={R_kill} must be at least 4r={4 * r}")
    if far_field not in MODES:
        raise ValueError(f"far_field must be one of {MODES}")


def box_equilibrium(r: int, d: int) -> EquilibriumMeasure:
    return lookup_equilibrium(box_points(r, d))


def iter_samples(r: int, u: float, n: int, seed: int = 0, d: int = 3, R_kill: int | None = None,
                 far_field: str = "reinsert", start: int = 0, record_walks: bool = False):
    """Yield samples ``start .. start+n-1`` in order."""
    R_kill = R_kill or default_kill_radius(r, far_field)
    _check(r, u, R_kill, far_field)
    eq = box_equilibrium(r, d)
    i = start
    runner = None
    while i < start + n:
        block, offset = divmod(i, BLOCK)
        if runner is None or runner.block != block:
            runner = _BlockRunner(eq, r, u, R_kill, far_field == "reinsert", seed, block)
            runner.block = block
            while runner.done < offset:
                runner.next_trace()
        J, trace, walks = runner.next_trace(record_walks)
        yield InterlacementSample(r=r, u=u, d=d, J=J, trace=trace, seed=seed, walk_traces=walks)
        i += 1


def sample_interlacement(r: int, u: float, R_kill: int | None = None, seed: int = 0, d: int = 3,
                         far_field: str = "reinsert", index: int = 0,
                         record_walks: bool = False) -> InterlacementSample:
    """Sample number ``index`` of the interlacement trace in B(0, r) at level u."""
    return next(iter_samples(r, u, 1, seed, d, R_kill, far_field, start=index, record_walks=record_walks))


def vacant_component_stats(r: int, u: float, seed: int = 0, d: int = 3, R_kill: int | None = None,
                           far_field: str = "reinsert", index: int = 0) -> ComponentStats:
    """Nearest-neighbour components of V^u inside B(0, r), free boundary."""
    s = sample_interlacement(r, u, R_kill, seed, d, far_field, index)
    return label_components(s.trace, 2 * r + 1, d, adjacency="nn", mode="box")


@dataclass
class VacancyResult:
    V: np.ndarray
    u: float
    n: int
    vacant: int
    p_hat: float
    stderr: float
    capacity: float
    p_theory: float
    bias_bound: float
    bias_flag: bool
    meta: dict = field(default_factory=dict)

    @property
    def z(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.p_hat == self.p_theory else math.inf
        return (self.p_hat - self.p_theory) / self.stderr


def _vacancy_block(args):
    eq, r, u, R_kill, reinsert, seed, block, n, vbits, full = args
    return _BlockRunner(eq, r, u, R_kill, reinsert, seed, block).hits(n, vbits, full)


def theory_capacity(V) -> float:
    """cap(V) from the two-radius extrapolated harmonic solve (cached per set)."""
    pts = as_points(V)
    shift = (pts.max(axis=0) + pts.min(axis=0)) // 2
    return _theory_cached(tuple(map(tuple, (pts - shift).tolist())))


_THEORY: dict = {}


def _theory_cached(key) -> float:
    if key not in _THEORY:
        _THEORY[key] = equilibrium(np.array(key, dtype=np.int64), method="richardson").capacity
    return _THEORY[key]


def hit_masks(Vs: list[np.ndarray], r: int, d: int) -> tuple[np.ndarray, int]:
    """Per box site, a bit mask of which sets in Vs contain it."""
    if len(Vs) > 64:
        raise ValueError("at most 64 sets per batch")
    side = 2 * r + 1
    vbits = np.zeros(side**d, dtype=np.uint64)
    mult = side ** np.arange(d - 1, -1, -1)
    for i, V in enumerate(Vs):
        if len(V) == 0:
            continue
        if linf_radius(V) > r:
            raise ValueError(f"set {i} is not inside B(0, {r})")
        vbits[((V + r) * mult).sum(axis=1)] |= np.uint64(1 << i)
    full = 0
    for i, V in enumerate(Vs):
        if len(V):
            full |= 1 << i
    return vbits, full


def vacancy_prob(V, u: float, n: int, seed: int = 0, r: int | None = None, d: int | None = None,
                 R_kill: int | None = None, far_field: str = "reinsert", workers: int = 1):
    """Fraction of n interlacement samples whose trace misses V, against exp(-u cap(V)).

    ``V`` may be one set or a list of sets; all sets are scored on the same
    samples. Returns a VacancyResult (or a list of them).
    """
    single = not (isinstance(V, (list, tuple)) and len(V) > 0 and np.ndim(V[0]) == 2)
    raw = [V] if single else list(V)
    if n < 1:
        raise ValueError("n must be >= 1")
    if d is None:
        d = next((np.shape(v)[-1] for v in raw if np.size(v)), 3)
    Vs = [np.asarray(v, dtype=np.int64).reshape(-1, d) for v in raw]
    if r is None:
        r = max(1, max((linf_radius(v) for v in Vs if len(v)), default=1))
    R_kill = R_kill or default_kill_radius(r, far_field)
    _check(r, u, R_kill, far_field)
    eq = box_equilibrium(r, d)
    vbits, full = hit_masks(Vs, r, d)
    n_blocks = -(-n // BLOCK)
    jobs = [(eq, r, u, R_kill, far_field == "reinsert", seed, b, min(BLOCK, n - b * BLOCK), vbits, full)
            for b in range(n_blocks)]
    if workers > 1 and n_blocks > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_vacancy_block, jobs))
    else:
        parts = [_vacancy_block(j) for j in jobs]
    hits = np.concatenate(parts)
    out = []
    for i, v in enumerate(Vs):
        if len(v) == 0:
            vacant, cap = n, 0.0
        else:
            vacant = int(np.count_nonzero((hits & np.uint64(1 << i)) == 0))
            cap = theory_capacity(v)
        p = vacant / n
        se = math.sqrt(p * (1 - p) / n)
        pth = math.exp(-u * cap)
        bias = _bias_bound(eq, r, u, R_kill, far_field, cap)
        out.append(VacancyResult(V=v, u=u, n=n, vacant=vacant, p_hat=p, stderr=se, capacity=cap,
                                 p_theory=pth, bias_bound=bias, bias_flag=bias > 0.1 * se if se > 0 else bias > 0,
                                 meta={"r": r, "R_kill": R_kill, "far_field": far_field, "seed": seed,
                                       "box_capacity": eq.capacity}))
    return out[0] if single else out


def _bias_bound(eq, r, u, R_kill, far_field, cap_V) -> float:
    """Heuristic bound on |E p_hat - p| from the treatment of the far field."""
    if cap_V == 0 or u == 0:
        return 0.0
    d = eq.d
    if far_field == "kill":
        return math.exp(-u * cap_V) * u * cap_V * (r / R_kill) ** (d - 2)
    # returns happen with probability ~ (r / R_kill)^(d-2); their entrance law is
    # off from e_A / cap by O(r / R_kill)
    return math.exp(-u * cap_V) * u * cap_V * (r / R_kill) ** (d - 1)
