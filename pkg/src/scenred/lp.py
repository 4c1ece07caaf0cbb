"""Small dense LP solver (two-phase primal simplex, Bland's rule) with duals.

The problems handled here are desk-sized: transportation problems over a few
dozen atoms and second-stage programs with a handful of rows. Determinism and
guaranteed termination matter more than speed, hence Bland's rule throughout.

Problem form::

    min  q^T z
    s.t. A_eq z  = b_eq
         A_ub z <= b_ub
         z >= 0

Inequality rows are turned into equalities with explicit slacks; duals are
reported for the caller's rows only (``dual`` for equalities, ``ub_dual`` for
inequalities, the latter always <= 0).
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import CyclingGuardExceeded, DualInfeasible, EnumerationTooLarge, ShapeMismatch

FEAS_TOL = 1e-8
DUALITY_TOL = 1e-7
PIVOT_TOL = 1e-9
ITER_FACTOR = 50
ENUMERATION_CAP = 10**6


class LpStatus(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    objective: np.ndarray
    eq_matrix: np.ndarray
    rhs: np.ndarray
    ub_matrix: Optional[np.ndarray] = None
    ub_rhs: Optional[np.ndarray] = None

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.objective, dtype=float))
        n = q.size
        A = np.atleast_2d(np.asarray(self.eq_matrix, dtype=float)) if np.size(self.eq_matrix) else np.zeros((0, n))
        b = np.atleast_1d(np.asarray(self.rhs, dtype=float)) if np.size(self.rhs) else np.zeros(0)
        if A.shape != (b.size, n):
            raise ShapeMismatch(f"eq_matrix shape {A.shape} does not fit rhs {b.size} / objective {n}")
        if self.ub_matrix is not None and np.size(self.ub_matrix):
            G = np.atleast_2d(np.asarray(self.ub_matrix, dtype=float))
            h = np.atleast_1d(np.asarray(self.ub_rhs, dtype=float))
        else:
            G, h = np.zeros((0, n)), np.zeros(0)
        if G.shape != (h.size, n):
            raise ShapeMismatch(f"ub_matrix shape {G.shape} does not fit ub_rhs {h.size}")
        for arr in (q, A, b, G, h):
            if not np.all(np.isfinite(arr)):
                raise ValueError("LP data must be finite")
        object.__setattr__(self, "objective", q)
        object.__setattr__(self, "eq_matrix", A)
        object.__setattr__(self, "rhs", b)
        object.__setattr__(self, "ub_matrix", G)
        object.__setattr__(self, "ub_rhs", h)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    @property
    def n_eq(self) -> int:
        return self.rhs.size

    @property
    def n_ub(self) -> int:
        return self.ub_rhs.size


@dataclass(eq=False)
class LpSolution:
    status: LpStatus
    primal: Optional[np.ndarray] = None
    dual: Optional[np.ndarray] = None
    ub_dual: Optional[np.ndarray] = None
    objective_value: float = math.nan
    iterations: int = 0

    @property
    def optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


def _pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    col = T[:, j].copy()
    col[r] = 0.0
    T -= np.outer(col, T[r])


def _bland(T, basis, allowed, budget):
    """Run Bland pivots on tableau T in place. Returns (status, pivots used)."""
    used = 0
    m = T.shape[0] - 1
    while True:
        red = T[-1, :-1]
        candidates = np.flatnonzero((red < -PIVOT_TOL) & allowed)
        if candidates.size == 0:
            return LpStatus.OPTIMAL, used
        j = int(candidates[0])
        colj = T[:m, j]
        rows = np.flatnonzero(colj > PIVOT_TOL)
        if rows.size == 0:
            return LpStatus.UNBOUNDED, used
        ratios = T[rows, -1] / colj[rows]
        best = ratios.min()
        ties = rows[ratios <= best + PIVOT_TOL * max(1.0, abs(best))]
        r = int(min(ties, key=lambda k: basis[k]))
        if used >= budget:
            raise CyclingGuardExceeded(f"simplex exceeded {budget} pivots")
        _pivot(T, r, j)
        basis[r] = j
        used += 1


def solve(lp: LinearProgram) -> LpSolution:
    """Solve ``lp`` to optimality, or report infeasibility/unboundedness."""
    n, me, mu = lp.n_vars, lp.n_eq, lp.n_ub
    m = me + mu
    N = n + mu
    A = np.zeros((m, N))
    A[:me, :n] = lp.eq_matrix
    A[me:, :n] = lp.ub_matrix
    A[me:, n:] = np.eye(mu)
    b = np.concatenate([lp.rhs, lp.ub_rhs])
    c = np.concatenate([lp.objective, np.zeros(mu)])

    if m == 0:
        if np.any(c < 0):
            return LpSolution(LpStatus.UNBOUNDED, objective_value=-math.inf)
        return LpSolution(LpStatus.OPTIMAL, np.zeros(n), np.zeros(0), np.zeros(0), 0.0)

    budget = ITER_FACTOR * (m + N)
    sign = np.where(b < 0, -1.0, 1.0)
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A * sign[:, None]
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b * sign
    T[-1, :N] = -T[:m, :N].sum(axis=0)
    T[-1, -1] = -T[:m, -1].sum()
    basis = list(range(N, N + m))

    allowed = np.ones(N + m, dtype=bool)
    _, it1 = _bland(T, basis, allowed, budget)
    scale = max(1.0, float(np.abs(b).max()))
    if -T[-1, -1] > FEAS_TOL * scale:
        return LpSolution(LpStatus.INFEASIBLE, objective_value=math.inf, iterations=it1)

    # drive artificials out of the basis; rows where that fails are redundant
    keep = []
    for r in range(m):
        if basis[r] >= N:
            nz = np.flatnonzero(np.abs(T[r, :N]) > PIVOT_TOL)
            if nz.size:
                _pivot(T, r, int(nz[0]))
                basis[r] = int(nz[0])
                keep.append(r)
        else:
            keep.append(r)
    T = np.vstack([T[keep][:, list(range(N)) + [-1]], np.zeros((1, N + 1))])
    basis = [basis[r] for r in keep]
    mk = len(keep)
    cB = c[basis]
    T[-1, :N] = c - cB @ T[:mk, :N]
    T[-1, -1] = -cB @ T[:mk, -1]

    status, it2 = _bland(T, basis, np.ones(N, dtype=bool), budget - it1)
    iters = it1 + it2
    if status is LpStatus.UNBOUNDED:
        return LpSolution(LpStatus.UNBOUNDED, objective_value=-math.inf, iterations=iters)

    cB = c[basis]
    B = A[keep][:, basis]
    x = np.zeros(N)
    try:
        x[basis] = np.linalg.solve(B, b[keep])
        y_kept = np.linalg.solve(B.T, cB)
    except np.linalg.LinAlgError:  # pragma: no cover - basis is nonsingular by construction
        x[basis] = T[:mk, -1]
        y_kept = np.linalg.lstsq(B.T, cB, rcond=None)[0]
    x[np.abs(x) < 1e-12] = 0.0
    x = np.maximum(x, 0.0)
    y = np.zeros(m)
    y[keep] = y_kept
    z = x[:n]
    return LpSolution(
        LpStatus.OPTIMAL,
        primal=z,
        dual=y[:me],
        ub_dual=y[me:],
        objective_value=float(lp.objective @ z),
        iterations=iters,
    )


def dual_inf_norm_bound(W, q) -> float:
    """sup{ ||pi||_inf : W^T pi <= q }, or +inf when the dual polytope is unbounded.

    Raises DualInfeasible when the dual polytope is empty.
    """
    W = np.atleast_2d(np.asarray(W, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    m, n = W.shape
    if q.size != n:
        raise ShapeMismatch(f"W is {W.shape} but q has {q.size} entries")
    # pi = u - v with u, v >= 0
    G = np.hstack([W.T, -W.T])
    feas = solve(LinearProgram(np.zeros(2 * m), np.zeros((0, 2 * m)), np.zeros(0), G, q))
    if feas.status is LpStatus.INFEASIBLE:
        raise DualInfeasible("the dual feasible set {pi : W^T pi <= q} is empty")
    bound = 0.0
    for i in range(m):
        for s in (1.0, -1.0):
            obj = np.zeros(2 * m)
            obj[i], obj[m + i] = -s, s  # minimise -s*pi_i
            res = solve(LinearProgram(obj, np.zeros((0, 2 * m)), np.zeros(0), G, q))
            if res.status is LpStatus.UNBOUNDED:
                return math.inf
            bound = max(bound, -res.objective_value)
    return bound


def _box_size(box) -> int:
    size = 1
    for lo, hi in box:
        size *= max(0, int(hi) - int(lo) + 1)
    return size


def milp_solve_bruteforce(lp: LinearProgram, integer_vars: Sequence[int] = (),
                          box: Sequence[tuple[int, int]] = (),
                          cap: int = ENUMERATION_CAP) -> LpSolution:
    """Exact MILP optimum by enumerating the integer box.

    The box bounds are part of the model: integer variable ``integer_vars[k]``
    ranges over ``box[k][0] .. box[k][1]`` inclusive. For every assignment the
    remaining continuous LP is solved; the first best assignment in
    lexicographic order wins. When all variables are integer, feasibility is
    checked in bulk and no duals are reported.
    """
    integer_vars = [int(i) for i in integer_vars]
    if not integer_vars:
        return solve(lp)
    if len(box) != len(integer_vars):
        raise ShapeMismatch("need one (lo, hi) pair per integer variable")
    size = _box_size(box)
    if size > cap:
        raise EnumerationTooLarge(f"integer box has {size} points, cap is {cap}")
    n = lp.n_vars
    cont = [j for j in range(n) if j not in set(integer_vars)]
    A, b, G, h, q = lp.eq_matrix, lp.rhs, lp.ub_matrix, lp.ub_rhs, lp.objective
    AI, GI, qI = A[:, integer_vars], G[:, integer_vars], q[integer_vars]

    if not cont:
        if size == 0:
            return LpSolution(LpStatus.INFEASIBLE, objective_value=math.inf)
        ranges = [np.arange(int(lo), int(hi) + 1, dtype=float) for lo, hi in box]
        best_val, best_z = math.inf, None
        chunk = 200_000
        grids = np.meshgrid(*ranges, indexing="ij")
        Z_all = np.stack([g.ravel() for g in grids], axis=1)
        for start in range(0, Z_all.shape[0], chunk):
            Z = Z_all[start:start + chunk]
            ok = np.ones(Z.shape[0], dtype=bool)
            if A.shape[0]:
                ok &= np.all(np.abs(Z @ AI.T - b) <= FEAS_TOL, axis=1)
            if G.shape[0]:
                ok &= np.all(Z @ GI.T <= h + FEAS_TOL, axis=1)
            if not ok.any():
                continue
            vals = np.where(ok, Z @ qI, math.inf)
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_z = float(vals[k]), Z[k]
        if best_z is None:
            return LpSolution(LpStatus.INFEASIBLE, objective_value=math.inf)
        z = np.zeros(n)
        z[integer_vars] = best_z
        return LpSolution(LpStatus.OPTIMAL, primal=z, objective_value=best_val)

    best: Optional[LpSolution] = None
    best_z = None
    for assignment in itertools.product(*[range(int(lo), int(hi) + 1) for lo, hi in box]):
        zI = np.asarray(assignment, dtype=float)
        sub = LinearProgram(q[cont], A[:, cont], b - AI @ zI, G[:, cont], h - GI @ zI)
        res = solve(sub)
        if res.status is LpStatus.INFEASIBLE:
            continue
        if res.status is LpStatus.UNBOUNDED:
            return LpSolution(LpStatus.UNBOUNDED, objective_value=-math.inf)
        val = res.objective_value + float(qI @ zI)
        if best is None or val < best.objective_value - 1e-12:
            res.objective_value = val
            best, best_z = res, zI
    if best is None:
        return LpSolution(LpStatus.INFEASIBLE, objective_value=math.inf)
    z = np.zeros(n)
    z[integer_vars] = best_z
    z[cont] = best.primal
    return LpSolution(LpStatus.OPTIMAL, primal=z, dual=best.dual, ub_dual=best.ub_dual,
                      objective_value=best.objective_value, iterations=best.iterations)
