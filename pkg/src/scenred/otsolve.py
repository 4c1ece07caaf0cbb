"""Exact discrete optimal transport for arbitrary nonnegative ground costs.

Costs may be asymmetric and may contain ``+inf`` (forbidden pairs). The
transportation LP is solved with :func:`scenred.lp.solve`; infinite entries are
simply left out of the variable set, so an infeasible remaining arc set means
the transport cost is ``+inf``.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidOrder, LipschitzViolation, ShapeMismatch
from .lp import LinearProgram, LpStatus, solve
from .measures import DiscreteDistribution, Scenario, union_support

MARGINAL_TOL = 1e-9
SYMMETRY_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """Ground cost evaluated on ``row_support x col_support``.

    ``estimated`` marks matrices built from sampled constants (price bounds,
    integrality gap) rather than exact ones.
    """

    entries: np.ndarray
    row_support: Optional[tuple[Scenario, ...]] = None
    col_support: Optional[tuple[Scenario, ...]] = None
    estimated: bool = False
    kind: str = "custom"

    def __post_init__(self):
        C = np.array(self.entries, dtype=float, ndmin=2)
        if np.isnan(C).any():
            raise ValueError("cost entries must not be NaN")
        if (C < 0).any():
            raise ValueError("cost entries must be nonnegative")
        C.setflags(write=False)
        object.__setattr__(self, "entries", C)
        for name, sup in (("row_support", self.row_support), ("col_support", self.col_support)):
            if sup is not None:
                sup = tuple(sup)
                object.__setattr__(self, name, sup)
        if self.row_support is not None and len(self.row_support) != C.shape[0]:
            raise ShapeMismatch("row_support length does not match rows")
        if self.col_support is not None and len(self.col_support) != C.shape[1]:
            raise ShapeMismatch("col_support length does not match cols")

    @property
    def rows(self) -> int:
        return self.entries.shape[0]

    @property
    def cols(self) -> int:
        return self.entries.shape[1]

    @property
    def T(self) -> "CostMatrix":
        return CostMatrix(self.entries.T, self.col_support, self.row_support, self.estimated, self.kind)

    @property
    def symmetric_flag(self) -> bool:
        C = self.entries
        if C.shape[0] != C.shape[1]:
            return False
        if self.row_support is not None and self.col_support is not None and self.row_support != self.col_support:
            return False
        inf_a, inf_b = np.isinf(C), np.isinf(C.T)
        if not np.array_equal(inf_a, inf_b):
            return False
        fin = ~inf_a
        return bool(np.all(np.abs(C[fin] - C.T[fin]) <= SYMMETRY_TOL * np.maximum(1.0, np.abs(C[fin]))))

    def submatrix(self, rows: Sequence[Scenario], cols: Sequence[Scenario]) -> "CostMatrix":
        """Restrict a cost built on a larger support to the given atoms."""
        if self.row_support is None or self.col_support is None:
            raise ShapeMismatch("submatrix needs labelled supports")
        ri = {a: i for i, a in enumerate(self.row_support)}
        ci = {a: i for i, a in enumerate(self.col_support)}
        I = [ri[a] for a in rows]
        J = [ci[a] for a in cols]
        return CostMatrix(self.entries[np.ix_(I, J)], tuple(rows), tuple(cols), self.estimated, self.kind)

    def scaled(self, t: float) -> "CostMatrix":
        return CostMatrix(self.entries * t, self.row_support, self.col_support, self.estimated, self.kind)

    def to_text(self) -> str:
        """Row-major plain text, one row per line, ``inf`` for +inf."""
        buf = io.StringIO()
        for row in self.entries:
            buf.write(" ".join("inf" if math.isinf(v) else repr(float(v)) for v in row))
            buf.write("\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str, **kwargs) -> "CostMatrix":
        rows = [line.split() for line in text.strip().splitlines() if line.strip()]
        return cls(np.array([[math.inf if tok == "inf" else float(tok) for tok in r] for r in rows]), **kwargs)


@dataclass(frozen=True, eq=False)
class TransportPlan:
    plan: np.ndarray
    cost: float

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.cost)


def transport_cost(P: DiscreteDistribution, Q: DiscreteDistribution, C) -> TransportPlan:
    """Optimal coupling of P (rows) and Q (columns) under ground cost C.

    Returns cost ``+inf`` with an empty plan when every coupling uses an
    infinite entry.
    """
    Cm = C.entries if isinstance(C, CostMatrix) else np.array(C, dtype=float, ndmin=2)
    n, m = len(P), len(Q)
    if Cm.shape != (n, m):
        raise ShapeMismatch(f"cost is {Cm.shape}, distributions have {n} and {m} atoms")
    a, b = P.weights, Q.weights
    # zero-weight atoms are dropped and come back as zero rows/cols
    I = np.flatnonzero(a > 0)
    J = np.flatnonzero(b > 0)
    sub = Cm[np.ix_(I, J)]
    arcs = np.argwhere(np.isfinite(sub))
    if arcs.size == 0:
        return TransportPlan(np.zeros((0, 0)), math.inf)
    k = arcs.shape[0]
    ni, nj = I.size, J.size
    A = np.zeros((ni + nj, k))
    A[arcs[:, 0], np.arange(k)] = 1.0
    A[ni + arcs[:, 1], np.arange(k)] = 1.0
    rhs = np.concatenate([a[I], b[J]])
    res = solve(LinearProgram(sub[arcs[:, 0], arcs[:, 1]], A, rhs))
    if res.status is not LpStatus.OPTIMAL:
        return TransportPlan(np.zeros((0, 0)), math.inf)
    plan = np.zeros((n, m))
    plan[I[arcs[:, 0]], J[arcs[:, 1]]] = res.primal
    cost = float(np.sum(np.where(plan > 0, Cm, 0.0) * plan))
    return TransportPlan(plan, max(cost, 0.0))


def _check_same_dim(P, Q):
    if P.dim != Q.dim:
        raise DimensionMismatch(f"dimensions differ: {P.dim} vs {Q.dim}")


def norm_cost_entries(rows: np.ndarray, cols: np.ndarray, power: float = 1.0) -> np.ndarray:
    D = np.linalg.norm(rows[:, None, :] - cols[None, :, :], axis=2)
    return D if power == 1.0 else D ** power


def wasserstein_p(P: DiscreteDistribution, Q: DiscreteDistribution, p: float = 1.0) -> float:
    """p-Wasserstein distance with Euclidean ground metric."""
    _check_same_dim(P, Q)
    if not p >= 1:
        raise InvalidOrder(f"order p must be >= 1, got {p}")
    C = norm_cost_entries(P.points, Q.points, p)
    t = transport_cost(P, Q, C).cost
    return t ** (1.0 / p)


def fm1_lower_bound(P: DiscreteDistribution, Q: DiscreteDistribution,
                    f: Callable[[np.ndarray], float], lipschitz: float = 1.0,
                    tol: float = 1e-9) -> float:
    """|E_P f - E_Q f| for a test function f certified 1-Lipschitz on supp(P) u supp(Q).

    The Lipschitz witness is checked on every pair of support points, so the
    returned value is a valid lower bound on W_1(P, Q).
    """
    _check_same_dim(P, Q)
    if lipschitz > 1.0 + tol:
        raise LipschitzViolation(f"declared Lipschitz constant {lipschitz} exceeds 1")
    support = union_support(P, Q)
    pts = np.array([s.coords for s in support])
    vals = np.array([float(f(x)) for x in pts])
    D = norm_cost_entries(pts, pts)
    excess = np.abs(vals[:, None] - vals[None, :]) - D
    if excess.max() > tol:
        i, j = np.unravel_index(int(np.argmax(excess)), excess.shape)
        raise LipschitzViolation(
            f"|f(x)-f(y)| exceeds ||x-y|| by {excess[i, j]:.3g} at {support[i]}, {support[j]}")
    lookup = dict(zip(support, vals))
    eP = float(np.dot(P.weights, [lookup[a] for a in P.atoms]))
    eQ = float(np.dot(Q.weights, [lookup[a] for a in Q.atoms]))
    return abs(eP - eQ)
