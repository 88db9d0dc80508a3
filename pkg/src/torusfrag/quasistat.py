"""Walk on the torus killed on entering B: the restricted operator P^B, its
Perron-Frobenius pair (quasistationary distribution), spectral gap, and the
conditional law of the continuous-time walk given survival.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numba as nb
import numpy as np
from scipy import sparse
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import gammaln

from .lattice import TorusGeom
from .rng import stream

DENSE_LIMIT = 5000
POWER_LIMIT = 100_000


class DisconnectedComplementError(ValueError):
    pass


class EigenConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float):
        super().__init__(msg)
        self.residual = residual


@nb.njit(cache=True)
def _matvec(x, y, sites, comp, N, d, strides):
    # y[i] = (1/2d) * sum of x over the neighbours of sites[i] that are not in B
    inv = 1.0 / (2 * d)
    for i in range(sites.shape[0]):
        s = sites[i]
        acc = 0.0
        rem = s
        for a in range(d):
            c = rem // strides[a]
            rem -= c * strides[a]
            up = s + strides[a] if c < N - 1 else s - (N - 1) * strides[a]
            dn = s - strides[a] if c > 0 else s + (N - 1) * strides[a]
            j = comp[up]
            if j >= 0:
                acc += x[j]
            j = comp[dn]
            if j >= 0:
                acc += x[j]
        y[i] = acc * inv


@nb.njit(cache=True)
def _matmat(X, Y, sites, comp, N, d, strides):
    inv = 1.0 / (2 * d)
    m = X.shape[1]
    for i in range(sites.shape[0]):
        s = sites[i]
        for k in range(m):
            Y[i, k] = 0.0
        rem = s
        for a in range(d):
            c = rem // strides[a]
            rem -= c * strides[a]
            up = s + strides[a] if c < N - 1 else s - (N - 1) * strides[a]
            dn = s - strides[a] if c > 0 else s + (N - 1) * strides[a]
            j = comp[up]
            if j >= 0:
                for k in range(m):
                    Y[i, k] += X[j, k]
            j = comp[dn]
            if j >= 0:
                for k in range(m):
                    Y[i, k] += X[j, k]
        for k in range(m):
            Y[i, k] *= inv


@nb.njit(cache=True)
def _reached(sites, comp, N, d, strides):
    n = sites.shape[0]
    seen = np.zeros(n, dtype=np.bool_)
    if n == 0:
        return 0
    stack = np.empty(n, dtype=np.int64)
    top = 1
    stack[0] = 0
    seen[0] = True
    count = 1
    while top > 0:
        top -= 1
        i = stack[top]
        s = sites[i]
        rem = s
        for a in range(d):
            c = rem // strides[a]
            rem -= c * strides[a]
            up = s + strides[a] if c < N - 1 else s - (N - 1) * strides[a]
            dn = s - strides[a] if c > 0 else s + (N - 1) * strides[a]
            for t in (up, dn):
                j = comp[t]
                if j >= 0 and not seen[j]:
                    seen[j] = True
                    stack[top] = j
                    top += 1
                    count += 1
    return count


class RestrictedOperator:
    """y -> P^B y on functions of T \\ B, computed on the fly from site coordinates."""

    def __init__(self, geom: TorusGeom, B):
        self.geom = geom
        inB = np.zeros(geom.total, dtype=np.bool_)
        B = np.asarray(B, dtype=np.int64).ravel()
        inB[B] = True
        self.in_B = inB
        self.sites = np.flatnonzero(~inB).astype(np.int64)
        comp = np.full(geom.total, -1, dtype=np.int64)
        comp[self.sites] = np.arange(len(self.sites))
        self.comp = comp
        self.strides = np.asarray(geom.strides, dtype=np.int64)
        self.n = len(self.sites)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim == 2:
            y = np.empty_like(x)
            _matmat(np.ascontiguousarray(x), y, self.sites, self.comp, self.geom.N, self.geom.d, self.strides)
            return y
        y = np.empty(self.n)
        _matvec(x, y, self.sites, self.comp, self.geom.N, self.geom.d, self.strides)
        return y

    def index_of(self, site: int) -> int:
        j = int(self.comp[site])
        if j < 0:
            raise ValueError(f"site {site} lies in B")
        return j

    def connected(self) -> bool:
        return self.n == 0 or _reached(self.sites, self.comp, self.geom.N, self.geom.d, self.strides) == self.n

    def row_sums(self) -> np.ndarray:
        return self(np.ones(self.n))

    def dense(self) -> np.ndarray:
        if self.n > DENSE_LIMIT:
            raise ValueError(f"dense matrix limited to {DENSE_LIMIT} sites, complement has {self.n}")
        return self.sparse().toarray()

    def sparse(self) -> sparse.csr_matrix:
        rows, cols = [], []
        coords = self.geom.coords(self.sites)
        for a in range(self.geom.d):
            for step in (1, -1):
                c = coords.copy()
                c[:, a] += step
                j = self.comp[self.geom.index(c)]
                keep = j >= 0
                rows.append(np.flatnonzero(keep))
                cols.append(j[keep])
        r = np.concatenate(rows)
        c = np.concatenate(cols)
        return sparse.csr_matrix((np.full(len(r), 1.0 / (2 * self.geom.d)), (r, c)), shape=(self.n, self.n))

    def linear_operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self, matmat=self, dtype=np.float64)


@dataclass
class QuasiDist:
    sigma: np.ndarray  # on the complement, ordered like RestrictedOperator.sites
    sites: np.ndarray
    lambda1: float
    lambda2: float
    residual: float
    iterations: int
    backend: str

    @property
    def gap(self) -> float:
        return self.lambda1 - self.lambda2

    def full(self, total: int) -> np.ndarray:
        out = np.zeros(total)
        out[self.sites] = self.sigma
        return out


def _power_top(op: RestrictedOperator, tol: float, max_iter: int):
    # lazy operator (I + P)/2: its spectrum is in [0, 1], so the top eigenvalue
    # dominates even though the torus graph is bipartite
    v = np.full(op.n, 1.0 / math.sqrt(op.n))
    lam, res = 0.0, math.inf
    for it in range(1, max_iter + 1):
        pv = op(v)
        lam = float(v @ pv)
        res = float(np.abs(pv - lam * v).max())
        if res <= tol:
            return v, lam, res, it
        w = 0.5 * (v + pv)
        v = w / np.linalg.norm(w)
    raise EigenConvergenceError(f"power iteration stopped at residual {res:.3g} after {max_iter} iterations", res)


def _power_second(op: RestrictedOperator, v1: np.ndarray, tol: float, max_iter: int, seed: int):
    rng = stream(seed, "quasistat", "deflation")
    v = rng.standard_normal(op.n)
    v -= (v @ v1) * v1
    v /= np.linalg.norm(v)
    lam, res = 0.0, math.inf
    for it in range(1, max_iter + 1):
        pv = op(v)
        lam = float(v @ pv)
        r = pv - lam * v
        res = float(np.abs(r - (r @ v1) * v1).max())
        if res <= tol:
            break
        w = 0.5 * (v + pv)
        w -= (w @ v1) * v1
        v = w / np.linalg.norm(w)
    # the Rayleigh quotient error is quadratic in the eigenvector error, so a
    # loose vector residual still pins lambda2 down tightly
    return lam, res, it


def quasistationary(geom: TorusGeom, B, tol: float = 1e-12, backend: str = "auto", max_iter: int | None = None,
                    seed: int = 0) -> QuasiDist:
    """Quasistationary distribution sigma = v1 / sum(v1) of the walk killed on B, with lambda1, lambda2."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    op = RestrictedOperator(geom, B)
    if op.n == 0:
        raise ValueError("T \\ B is empty")
    if not op.connected():
        raise DisconnectedComplementError("T \\ B is not connected; the top eigenvector is not unique")
    if op.n == geom.total:
        # nothing removed: stochastic matrix, uniform stationary law
        lam2 = (geom.d - 1 + math.cos(2 * math.pi / geom.N)) / geom.d
        return QuasiDist(np.full(op.n, 1.0 / op.n), op.sites, 1.0, float(lam2), 0.0, 0, "exact")
    if backend == "auto":
        backend = "power" if op.n <= POWER_LIMIT else "lanczos"
    if backend == "power":
        cap = max_iter or max(10_000, 200 * geom.N**2)
        v1, lam1, res, it = _power_top(op, tol, cap)
        lam2, _, it2 = _power_second(op, v1, max(tol, 1e-9), cap, seed)
        iterations = it + it2
    elif backend == "lanczos":
        # a symmetric start vector would keep the Krylov space inside the
        # symmetric subspace and miss degenerate second eigenvectors
        v0 = np.abs(stream(seed, "quasistat", "lanczos").standard_normal(op.n)) + 1.0
        vals, vecs = eigsh(op.linear_operator(), k=2, which="LA", tol=tol * 1e-2, v0=v0, maxiter=max_iter)
        order = np.argsort(vals)[::-1]
        lam1, lam2 = float(vals[order[0]]), float(vals[order[1]])
        v1 = vecs[:, order[0]]
        res = float(np.abs(op(v1) - lam1 * v1).max())
        iterations = -1
    elif backend == "dense":
        w, V = np.linalg.eigh(op.dense())
        lam1, lam2 = float(w[-1]), float(w[-2])
        v1 = V[:, -1]
        res = float(np.abs(op(v1) - lam1 * v1).max())
        iterations = 0
    else:
        raise ValueError(f"unknown backend {backend!r}")
    v1 = v1 if v1.sum() > 0 else -v1
    sigma = np.clip(v1, 0.0, None)
    sigma /= sigma.sum()
    return QuasiDist(sigma, op.sites, lam1, lam2, res, iterations, backend)


def gap_check(geom: TorusGeom, B, **kw) -> tuple[float, float, float]:
    q = quasistationary(geom, B, **kw)
    return q.lambda1, q.lambda2, q.gap * geom.N**2


def _poisson_window(t: float, tail: float) -> tuple[int, int]:
    from scipy.stats import poisson

    if t == 0:
        return 0, 0
    lo = int(poisson.ppf(tail, t))
    hi = int(poisson.isf(tail, t)) + 1
    return max(lo, 0), hi


def conditional_distribution(geom: TorusGeom, B, x, t: float, tail: float = 1e-16) -> np.ndarray:
    """P_x[Y_t = . | H_B > t] for the continuous-time walk, on the complement of B.

    ``x`` may be one start site or an array of them (then one column per start).
    Uses uniformization, sum_k Poisson(t; k) (P^B)^k delta_x, dropping Poisson
    mass below ``tail`` on each side. Everything is carried with a running
    log-scale so large t neither underflows nor overflows.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    op = RestrictedOperator(geom, B)
    xs = np.atleast_1d(np.asarray(x, dtype=np.int64))
    cols = np.array([op.index_of(int(s)) for s in xs])
    v = np.zeros((op.n, len(xs)))
    v[cols, np.arange(len(xs))] = 1.0
    if t == 0:
        return v[:, 0] if np.ndim(x) == 0 else v
    lo, hi = _poisson_window(t, tail)
    log_scale = np.zeros(len(xs))  # v_true = v * exp(log_scale)
    acc = np.zeros_like(v)
    acc_log = np.full(len(xs), -np.inf)  # acc_true = acc * exp(acc_log)
    for k in range(hi + 1):
        if k >= lo:
            lw = -t + k * math.log(t) - gammaln(k + 1) + log_scale
            new_log = np.maximum(acc_log, lw)
            acc = acc * np.exp(acc_log - new_log) + v * np.exp(lw - new_log)
            acc_log = new_log
        if k < hi:
            v = op(v)
            m = np.abs(v).max(axis=0)
            if np.any(m == 0):
                raise FloatingPointError("conditional mass vanished (walk killed with certainty)")
            v /= m
            log_scale += np.log(m)
    out = acc / acc.sum(axis=0)
    return out[:, 0] if np.ndim(x) == 0 else out


def sup_distance(cond: np.ndarray, sigma: np.ndarray) -> float:
    c = cond if cond.ndim == 2 else cond[:, None]
    return float(np.abs(c - sigma[:, None]).max())


def decay_profile(geom: TorusGeom, B, x, times, q: QuasiDist | None = None) -> np.ndarray:
    q = q or quasistationary(geom, B)
    return np.array([sup_distance(conditional_distribution(geom, B, x, t), q.sigma) for t in times])
