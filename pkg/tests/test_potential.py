from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spl
from scipy.integrate import quad
from scipy.special import ive

from torusfrag.lattice import TorusGeom, box_points, linf_ball
from torusfrag.potential import (
    ExtrapolationError,
    HarmonicConvergenceError,
    capacity_mc,
    equilibrium,
    green_asymptotic,
    harmonic_solve,
    hitting_sites,
    mean_hitting,
)
from torusfrag.rng import stream

# Capacities from an independent route: the exact lattice Green function
# G(x) = int_0^inf prod_a e^{-t/3} I_{x_a}(t/3) dt, evaluated by quadrature,
# and cap(A) = sum of the solution of G_A e = 1 on A.
EXACT_CAPACITY = {
    "point": 0.6594626704490008,
    "pair": 0.9838781150091238,
    "ball1": 3.1562058438739435,
    "ball2": 5.849583061586422,
    "ball4": 11.321501554021657,
}
SETS = {
    "point": np.zeros((1, 3), dtype=np.int64),
    "pair": np.array([[0, 0, 0], [1, 0, 0]]),
    "ball1": box_points(1, 3),
    "ball2": box_points(2, 3),
    "ball4": box_points(4, 3),
}


def exact_green(x) -> float:
    x = np.abs(np.asarray(x, dtype=int))
    d = len(x)
    f = lambda t: float(np.prod([ive(int(a), t / d) for a in x]))
    return quad(f, 0, np.inf, limit=500, epsabs=1e-13, epsrel=1e-12)[0]


def test_exact_green_reproduces_point_capacity():
    assert 1 / exact_green([0, 0, 0]) == pytest.approx(EXACT_CAPACITY["point"], rel=1e-9)


@pytest.mark.parametrize("x, rel", [([10, 0, 0], 1e-4), ([7, 7, 0], 1e-4), ([9, 6, 3], 1e-4), ([16, 0, 0], 2e-5)])
def test_green_asymptotic_against_exact(x, rel):
    assert green_asymptotic(np.array(x))[0] == pytest.approx(exact_green(x), rel=rel)


@pytest.mark.parametrize("name", list(SETS))
def test_farfield_capacity_matches_exact(name):
    eq = equilibrium(SETS[name], method="farfield")
    assert eq.capacity == pytest.approx(EXACT_CAPACITY[name], rel=1e-6)
    assert eq.error < 1e-4
    assert np.all(eq.weights > 0) and np.all(eq.weights <= 1)


@pytest.mark.parametrize("name", ["point", "pair", "ball1"])
def test_richardson_capacity_close_to_exact(name):
    eq = equilibrium(SETS[name])
    assert eq.method == "extrapolated"
    assert eq.capacity == pytest.approx(EXACT_CAPACITY[name], rel=1e-3)


def test_equilibrium_respects_symmetry():
    eq = equilibrium(box_points(2, 3), method="farfield")
    w = {tuple(p): v for p, v in zip(eq.boundary.tolist(), eq.weights)}
    for p, v in w.items():
        assert w[tuple(-np.array(p))] == pytest.approx(v, rel=1e-8)
        assert w[(p[1], p[0], p[2])] == pytest.approx(v, rel=1e-8)
    # corners escape more easily than face centres
    assert w[(2, 2, 2)] > w[(2, 1, 1)] > w[(2, 0, 0)]


def test_capacity_monotone_under_inclusion():
    caps = [equilibrium(SETS[n], method="farfield").capacity for n in ("point", "pair", "ball1", "ball2")]
    assert caps == sorted(caps)


def test_capacity_is_translation_invariant():
    a = equilibrium(SETS["pair"], method="farfield").capacity
    b = equilibrium(SETS["pair"] + np.array([3, -2, 1]), method="farfield").capacity
    assert a == pytest.approx(b, rel=1e-7)


def _dense_harmonic(A, R):
    """Direct sparse solve of the same Dirichlet problem on B(0, R)."""
    pts = box_points(R, 3)
    index = {tuple(p): i for i, p in enumerate(pts.tolist())}
    inA = {tuple(p) for p in np.asarray(A).tolist()}
    rows, cols, vals, rhs = [], [], [], np.zeros(len(pts))
    for i, p in enumerate(pts.tolist()):
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        if tuple(p) in inA:
            rhs[i] = 1.0
            continue
        for a in range(3):
            for s in (1, -1):
                q = list(p)
                q[a] += s
                j = index.get(tuple(q))
                if j is not None:
                    rows.append(i)
                    cols.append(j)
                    vals.append(-1 / 6)
    M = sp.csr_matrix((vals, (rows, cols)), shape=(len(pts), len(pts)))
    return pts, spl.spsolve(M, rhs)


@pytest.mark.parametrize("A", [SETS["point"], np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0]])])
def test_harmonic_solve_matches_direct_solve(A):
    R = 6
    f = harmonic_solve(A, R, tol=1e-12)
    pts, ref = _dense_harmonic(A, R)
    assert np.abs(f.at(pts) - ref).max() < 1e-9


def test_harmonic_solve_errors():
    with pytest.raises(ValueError):
        harmonic_solve(SETS["ball4"], 6)
    with pytest.raises(ValueError):
        harmonic_solve(SETS["point"], 6, tol=0)
    with pytest.raises(HarmonicConvergenceError):
        harmonic_solve(SETS["point"], 20, max_sweeps=3)
    with pytest.raises(ValueError):
        harmonic_solve(SETS["pair"], 6, symmetric=True)


def test_escape_probabilities_decrease_with_radius():
    from torusfrag.potential import escape_within

    q = [escape_within(harmonic_solve(SETS["point"], R, tol=1e-12), SETS["point"], SETS["point"])[0]
         for R in (4, 8, 16)]
    assert q[0] > q[1] > q[2] > EXACT_CAPACITY["point"]


def test_bad_radii():
    with pytest.raises(ValueError):
        equilibrium(SETS["point"], R1=40, R2=30)
    with pytest.raises(ValueError):
        equilibrium(SETS["point"], method="nope")
    assert issubclass(ExtrapolationError, RuntimeError)


@pytest.mark.parametrize("name", ["point", "pair", "ball1"])
def test_capacity_mc_within_three_sigma(name):
    cap, sd = capacity_mc(SETS[name], n=2000, seed=5)
    assert abs(cap - EXACT_CAPACITY[name]) <= 3 * sd


def test_capacity_mc_without_correction_is_biased_up():
    cap, sd = capacity_mc(SETS["point"], R_kill=16, n=20_000, seed=1, far_field="none")
    assert cap - EXACT_CAPACITY["point"] > 3 * sd


def test_hitting_sites_land_in_target():
    geom = TorusGeom(3, 10)
    V = linf_ball(0, 1, geom)
    starts = stream(0, "t").integers(geom.total, size=200)
    times, where = hitting_sites(geom, V, starts, stream(0, "s"))
    assert np.isin(where, V).all()
    assert np.all((times == 0) == np.isin(starts, V))


def test_mean_hitting_against_linear_solve():
    geom = TorusGeom(3, 10)
    V = linf_ball(0, 1, geom)
    from torusfrag.quasistat import RestrictedOperator

    op = RestrictedOperator(geom, V)
    h = spl.spsolve(sp.identity(op.n, format="csc") - op.sparse().tocsc(), np.ones(op.n))
    exact = h.sum() / geom.total
    mh = mean_hitting(geom, V, 4000, seed=3)
    assert abs(mh.H_bar - exact) <= 4 * mh.stderr
    assert mh.gloc_ratio == pytest.approx(geom.total / (mh.H_bar * mh.capacity))
