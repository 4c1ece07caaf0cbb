import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_permutation_cost, w1_on_line
from scenred.errors import DimensionMismatch, InvalidOrder, LipschitzViolation, ShapeMismatch
from scenred.measures import dirac, make_distribution, random_distribution, uniform
from scenred.otsolve import CostMatrix, fm1_lower_bound, transport_cost, wasserstein_p


def _check_marginals(P, Q, plan, C):
    assert np.allclose(plan.sum(axis=1), P.weights, atol=1e-9)
    assert np.allclose(plan.sum(axis=0), Q.weights, atol=1e-9)
    assert np.all(plan >= -1e-12)
    assert not np.any((plan > 1e-12) & np.isinf(C))


def test_self_transport_is_free():
    P = make_distribution([(0,), (1,), (3,)], [0.2, 0.5, 0.3])
    C = np.abs(np.subtract.outer([0, 1, 3], [0, 1, 3])).astype(float)
    res = transport_cost(P, P, C)
    assert res.cost == 0.0
    assert np.allclose(res.plan, np.diag(P.weights))


def test_diracs_force_the_coupling():
    res = transport_cost(dirac((1,)), dirac((4,)), [[2.5]])
    assert res.cost == 2.5 and res.plan.tolist() == [[1.0]]


def test_four_atom_permutation_oracle():
    rng = np.random.default_rng(4)
    P, Q = uniform([(i,) for i in range(4)]), uniform([(i + 10,) for i in range(4)])
    for _ in range(20):
        C = rng.random((4, 4)) * 5
        assert transport_cost(P, Q, C).cost == pytest.approx(best_permutation_cost(C), abs=1e-9)


def test_infinite_entries():
    P, Q = uniform([(0,), (1,)]), uniform([(0,), (1,)])
    C = np.array([[0.0, math.inf], [math.inf, 0.0]])
    assert transport_cost(P, Q, C).cost == 0.0
    C2 = np.array([[math.inf, math.inf], [1.0, 0.0]])
    res = transport_cost(P, Q, C2)
    assert math.isinf(res.cost) and not res.feasible and res.plan.size == 0


def test_zero_weight_atoms_come_back_as_zero_rows():
    P = make_distribution([(0,), (1,), (2,)], [0.5, 0.0, 0.5])
    Q = uniform([(0,), (2,)])
    C = np.abs(np.subtract.outer([0, 1, 2], [0, 2])).astype(float)
    res = transport_cost(P, Q, C)
    assert res.plan.shape == (3, 2) and res.cost == 0.0
    assert np.all(res.plan[1] == 0)


def test_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        transport_cost(dirac((0,)), uniform([(0,), (1,)]), [[1.0]])


def test_cost_matrix_validation_and_text_roundtrip():
    with pytest.raises(ValueError):
        CostMatrix([[0.0, -1.0]])
    with pytest.raises(ValueError):
        CostMatrix([[math.nan]])
    C = CostMatrix([[0.0, math.inf], [2.5, 0.0]])
    back = CostMatrix.from_text(C.to_text())
    assert np.array_equal(back.entries, C.entries)
    assert "inf" in C.to_text()


def test_symmetric_flag_is_recomputed():
    assert CostMatrix([[0.0, 1.0], [1.0, 0.0]]).symmetric_flag
    assert not CostMatrix([[0.0, 1.0], [2.0, 0.0]]).symmetric_flag
    assert not CostMatrix([[0.0, 1.0]]).symmetric_flag


def test_wasserstein_diracs_any_order():
    a, b = dirac((0, 0)), dirac((3, 4))
    for p in (1, 1.5, 2, 3):
        assert wasserstein_p(a, b, p) == pytest.approx(5.0)


def test_wasserstein_self_is_zero():
    P = uniform([(0, 1), (2, 2)])
    assert wasserstein_p(P, P, 2) == 0.0


def test_wasserstein_errors():
    with pytest.raises(DimensionMismatch):
        wasserstein_p(dirac((0,)), dirac((0, 0)))
    with pytest.raises(InvalidOrder):
        wasserstein_p(dirac((0,)), dirac((1,)), 0.5)


def test_w1_matches_cdf_formula_on_the_line():
    rng = np.random.default_rng(8)
    cands = [(float(v),) for v in range(20)]
    for _ in range(20):
        P = random_distribution(rng, cands, 5)
        Q = random_distribution(rng, cands, 4)
        expected = w1_on_line([a[0] for a in P.atoms], P.weights, [a[0] for a in Q.atoms], Q.weights)
        assert wasserstein_p(P, Q, 1) == pytest.approx(expected, abs=1e-9)


def test_fm1_examples():
    P, Q = dirac((0,)), dirac((3,))
    assert fm1_lower_bound(P, Q, lambda x: 7.0) == 0.0
    assert fm1_lower_bound(P, Q, lambda x: x[0]) == pytest.approx(3.0) == pytest.approx(wasserstein_p(P, Q))
    with pytest.raises(LipschitzViolation):
        fm1_lower_bound(P, Q, lambda x: 2 * x[0])


def test_fm1_piecewise_linear_witness_below_w1():
    rng = np.random.default_rng(2)
    cands = [(float(v),) for v in range(12)]
    for _ in range(10):
        P, Q = random_distribution(rng, cands, 5), random_distribution(rng, cands, 5)
        knots = np.sort(rng.random(4) * 12)
        slopes = rng.uniform(-1, 1, 5)
        vals = np.concatenate([[0.0], np.cumsum(slopes[1:-1] * np.diff(knots))])

        def f(x, knots=knots, slopes=slopes, vals=vals):
            k = int(np.searchsorted(knots, x[0]))
            if k == 0:
                return slopes[0] * (x[0] - knots[0])
            return vals[k - 1] + slopes[k] * (x[0] - knots[k - 1])

        assert fm1_lower_bound(P, Q, f) <= wasserstein_p(P, Q, 1) + 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 5), st.integers(2, 5))
def test_raising_an_entry_never_lowers_cost(seed, n, m):
    rng = np.random.default_rng(seed)
    cands = [(float(i),) for i in range(8)]
    P, Q = random_distribution(rng, cands, n), random_distribution(rng, cands, m)
    C = rng.random((n, m)) * 10
    base = transport_cost(P, Q, C)
    _check_marginals(P, Q, base.plan, C)
    i, j = rng.integers(n), rng.integers(m)
    C2 = C.copy()
    C2[i, j] += rng.random() * 5
    assert transport_cost(P, Q, C2).cost >= base.cost - 1e-9


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_symmetric_cost_gives_same_cost_both_ways(seed):
    rng = np.random.default_rng(seed)
    pts = [(float(i), float(i * i % 5)) for i in range(7)]
    P, Q = random_distribution(rng, pts, 4), random_distribution(rng, pts, 3)
    M = rng.random((7, 7)) * 4
    M = M + M.T
    np.fill_diagonal(M, 0.0)
    idx = {a: k for k, a in enumerate(map(lambda p: make_distribution([p], [1]).atoms[0], pts))}
    C = M[np.ix_([idx[a] for a in P.atoms], [idx[a] for a in Q.atoms])]
    assert transport_cost(P, Q, C).cost == pytest.approx(transport_cost(Q, P, C.T).cost, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wasserstein_ordering_property(seed):
    rng = np.random.default_rng(seed)
    pts = [(float(a), float(b)) for a in range(4) for b in range(4)]
    P, Q = random_distribution(rng, pts, 4), random_distribution(rng, pts, 5)
    ws = [wasserstein_p(P, Q, p) for p in (1, 2, 3, 4)]
    assert all(a <= b + 1e-9 for a, b in zip(ws, ws[1:]))
