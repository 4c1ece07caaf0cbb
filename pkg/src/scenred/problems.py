"""Two-stage instances and the concrete example problems.

Every instance has a finite, ordered first-stage candidate list X, so values
such as v(P) = min_x g(x) + E_P[Q(x, xi)] and regrets sup_x [...] are exact
enumerations. Second stages are evaluated by closed form, LP, dynamic
programming or exhaustive enumeration, depending on the builder.

Max-form second stages (the knapsack) keep ``Q`` in its native orientation;
``loss`` flips the sign so that everything downstream works in min-form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import reduce
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, EnumerationTooLarge, InfeasibleRecourse
from .lp import ENUMERATION_CAP, LinearProgram, LpSolution, LpStatus, milp_solve_bruteforce, solve
from .measures import DiscreteDistribution, Scenario, as_scenario

CONTINUOUS = "continuous-recourse"
MILP = "milp-recourse"


@dataclass(frozen=True)
class LpModel:
    """Second-stage program at a fixed (x, xi), plus which rows carry the scenario."""

    lp: LinearProgram
    integer_vars: tuple[int, ...] = ()
    box: tuple[tuple[int, int], ...] = ()
    scenario_rows: tuple[int, ...] = ()


def _decision(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.atleast_1d(np.asarray(x, dtype=float)))


@dataclass(eq=False)
class TwoStageInstance:
    name: str
    candidates: tuple[tuple[float, ...], ...]
    first_stage_cost: Callable[[tuple[float, ...]], float]
    recourse: Optional[Callable[[tuple[float, ...], Scenario], float]]
    dim: int
    tags: frozenset = frozenset()
    orientation: str = "min"
    params: dict = field(default_factory=dict)
    lp_model: Optional[Callable[[tuple[float, ...], Scenario], LpModel]] = None
    _cache: dict = field(default_factory=dict, repr=False)
    _relax_cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.candidates = tuple(_decision(x) for x in self.candidates)
        if not self.candidates:
            raise ValueError("first-stage candidate set must be nonempty")
        if self.orientation not in ("min", "max"):
            raise ValueError("orientation must be 'min' or 'max'")
        if self.recourse is None and self.lp_model is None:
            raise ValueError("instance needs a recourse oracle or an LP model")

    @property
    def is_milp(self) -> bool:
        return MILP in self.tags

    def g(self, x) -> float:
        return float(self.first_stage_cost(_decision(x)))

    def Q(self, x, xi) -> float:
        """Second-stage value in the instance's native orientation."""
        x, xi = _decision(x), as_scenario(xi)
        if xi.dim != self.dim:
            raise DimensionMismatch(f"{self.name} expects {self.dim}-dim scenarios, got {xi.dim}")
        key = (x, xi)
        val = self._cache.get(key)
        if val is None:
            if self.recourse is not None:
                val = float(self.recourse(x, xi))
            else:
                val = self._solve_model(x, xi)
            self._cache[key] = val
        return val

    def _solve_model(self, x, xi) -> float:
        model = self.lp_model(x, xi)
        if model.integer_vars:
            res = milp_solve_bruteforce(model.lp, model.integer_vars, model.box)
        else:
            res = self.relaxation(x, xi)
        if res.status is LpStatus.INFEASIBLE:
            raise InfeasibleRecourse(f"{self.name}: second stage infeasible at x={x}, xi={xi.coords}")
        if res.status is LpStatus.UNBOUNDED:
            raise ValueError(f"{self.name}: second stage unbounded at x={x}, xi={xi.coords}")
        return res.objective_value

    def relaxation(self, x, xi) -> LpSolution:
        """LP (relaxation) of the second stage; requires an LP model."""
        if self.lp_model is None:
            raise TypeError(f"{self.name} has no LP model")
        x, xi = _decision(x), as_scenario(xi)
        key = (x, xi)
        res = self._relax_cache.get(key)
        if res is None:
            res = solve(self.lp_model(x, xi).lp)
            self._relax_cache[key] = res
        return res

    def relaxation_value(self, x, xi) -> float:
        res = self.relaxation(x, xi)
        if res.status is LpStatus.INFEASIBLE:
            raise InfeasibleRecourse(f"{self.name}: LP relaxation infeasible at x={x}")
        return res.objective_value

    def scenario_duals(self, x, xi) -> np.ndarray:
        """Optimal LP duals of the rows whose right-hand side depends on the scenario."""
        res = self.relaxation(x, xi)
        if not res.optimal:
            raise InfeasibleRecourse(f"{self.name}: no dual at x={x}, xi={as_scenario(xi).coords}")
        rows = self.lp_model(_decision(x), as_scenario(xi)).scenario_rows
        return np.asarray(res.dual)[list(rows)]

    def loss(self, x, xi) -> float:
        q = self.Q(x, xi)
        return q if self.orientation == "min" else -q

    def objective(self, x, xi) -> float:
        return self.g(x) + self.loss(x, xi)

    def loss_table(self, support: Sequence) -> np.ndarray:
        """|X| x n matrix of min-form second-stage values."""
        return np.array([[self.loss(x, s) for s in support] for x in self.candidates])

    def first_stage_costs(self) -> np.ndarray:
        return np.array([self.g(x) for x in self.candidates])


def second_stage(instance: TwoStageInstance, x, xi) -> float:
    return instance.Q(x, xi)


def optimal_first_stage_index(instance: TwoStageInstance, xi) -> int:
    vals = [instance.objective(x, xi) for x in instance.candidates]
    return int(np.argmin(vals))  # argmin keeps the lowest index on ties


def optimal_first_stage(instance: TwoStageInstance, xi) -> tuple[float, ...]:
    """x*(xi): argmin over X of g(x) + Q(x, xi), lowest candidate index on ties."""
    return instance.candidates[optimal_first_stage_index(instance, xi)]


def expected_value(instance: TwoStageInstance, P: DiscreteDistribution):
    """Return (v(P), minimizer) by enumerating X.

    v is reported in min-form: for max-form instances it is the negated
    expected value of the maximisation.
    """
    L = instance.loss_table(P.atoms)
    totals = instance.first_stage_costs() + L @ P.weights
    k = int(np.argmin(totals))
    return float(totals[k]), instance.candidates[k]


# ---------------------------------------------------------------------------
# builders


def build_newsvendor(c: float = 0.0, h: float = 1.0, p: float = 1.0,
                     grid: Sequence[float] = tuple(range(0, 31))) -> TwoStageInstance:
    """Order x before demand xi; pay c*x now, h per unit left over, p per unit short."""
    if min(c, h, p) < 0:
        raise ValueError("newsvendor costs must be nonnegative")

    def recourse(x, xi):
        return h * max(x[0] - xi[0], 0.0) + p * max(xi[0] - x[0], 0.0)

    return TwoStageInstance(
        name="newsvendor",
        candidates=[(float(v),) for v in grid],
        first_stage_cost=lambda x: c * x[0],
        recourse=recourse,
        dim=1,
        tags=frozenset({CONTINUOUS}),
        params={"c": c, "h": h, "p": p, "grid": [float(v) for v in grid]},
    )


@dataclass(frozen=True, eq=False)
class AffineMaps:
    """h(xi) = h0 + H xi and T(xi) = T0 + sum_k xi_k T_k."""

    h0: np.ndarray
    H: np.ndarray
    T0: np.ndarray
    Tk: np.ndarray

    def h(self, xi) -> np.ndarray:
        return self.h0 + self.H @ np.asarray(xi, dtype=float)

    def T(self, xi) -> np.ndarray:
        return self.T0 + np.tensordot(np.asarray(xi, dtype=float), self.Tk, axes=1)


def make_affine_maps(h0, H, T0, Tk=None) -> AffineMaps:
    h0 = np.atleast_1d(np.asarray(h0, dtype=float))
    H = np.asarray(H, dtype=float).reshape(h0.size, -1)
    T0 = np.asarray(T0, dtype=float).reshape(h0.size, -1)
    d = H.shape[1]
    Tk = np.zeros((d,) + T0.shape) if Tk is None else np.asarray(Tk, dtype=float).reshape((d,) + T0.shape)
    return AffineMaps(h0, H, T0, Tk)


def build_fixed_recourse_lp(q, W, maps: AffineMaps, candidates, g: Optional[Callable] = None,
                            integer_vars: Sequence[int] = (), box: Sequence[tuple[int, int]] = (),
                            name: str = "fixed-recourse-lp") -> TwoStageInstance:
    """Q(x, xi) = min{q^T z : W z = h(xi) - T(xi) x, z >= 0}, optionally with integer z."""
    q = np.atleast_1d(np.asarray(q, dtype=float))
    W = np.asarray(W, dtype=float).reshape(-1, q.size)
    if W.shape[0] != maps.h0.size:
        raise DimensionMismatch("W rows must match the length of h")
    m = W.shape[0]
    integer_vars = tuple(int(i) for i in integer_vars)
    box = tuple((int(lo), int(hi)) for lo, hi in box)

    def model(x, xi):
        rhs = maps.h(xi.coords) - maps.T(xi.coords) @ np.asarray(x)
        return LpModel(LinearProgram(q, W, rhs), integer_vars, box, tuple(range(m)))

    return TwoStageInstance(
        name=name,
        candidates=candidates,
        first_stage_cost=g if g is not None else (lambda x: 0.0),
        recourse=None,
        dim=maps.H.shape[1],
        tags=frozenset({MILP if integer_vars else CONTINUOUS}),
        params={"q": q, "W": W, "maps": maps, "integer_vars": integer_vars, "box": box},
        lp_model=model,
    )


def build_cfl_single_source(costs, capacities, candidates=None, opening_costs=None,
                            cap: int = ENUMERATION_CAP) -> TwoStageInstance:
    """Single-sourcing capacitated facility location as second stage.

    ``costs[i][j]`` is the unit cost of serving customer j from facility i and
    the scenario is the demand vector. Q is found by enumerating every
    customer-to-facility assignment.
    """
    c = np.asarray(costs, dtype=float)
    K = np.asarray(capacities, dtype=float)
    F, J = c.shape
    if K.size != F:
        raise DimensionMismatch("one capacity per facility")
    if F ** J > cap:
        raise EnumerationTooLarge(f"{F}^{J} assignments exceed cap {cap}")
    if candidates is None:
        candidates = [y for y in itertools.product((0.0, 1.0), repeat=F) if any(y)]
    f = np.zeros(F) if opening_costs is None else np.asarray(opening_costs, dtype=float)
    assign = np.array(list(itertools.product(range(F), repeat=J)), dtype=int)  # (F^J, J)
    unit = c[assign, np.arange(J)]  # (F^J, J)
    onehot = np.zeros((assign.shape[0], F, J))
    for j in range(J):
        onehot[np.arange(assign.shape[0]), assign[:, j], j] = 1.0

    def recourse(y, xi):
        d = np.asarray(xi.coords)
        if (d < 0).any():
            raise InfeasibleRecourse("demands must be nonnegative")
        load = onehot @ d  # (F^J, F)
        ok = np.all(load <= K * np.asarray(y) + 1e-9, axis=1)
        if not ok.any():
            raise InfeasibleRecourse(f"no feasible single-source assignment for y={y}, xi={xi.coords}")
        vals = unit @ d
        return float(vals[ok].min())

    return TwoStageInstance(
        name="cfl-single-source",
        candidates=candidates,
        first_stage_cost=lambda y: float(f @ np.asarray(y)),
        recourse=recourse,
        dim=J,
        tags=frozenset({MILP}),
        params={"costs": c, "capacities": K, "opening_costs": f},
    )


def knapsack_values(weights: Sequence[int], values: Sequence[float], max_capacity: int) -> np.ndarray:
    """best[c] = max value of an unbounded knapsack of integer capacity c."""
    best = np.zeros(max_capacity + 1)
    for cap in range(1, max_capacity + 1):
        b = best[cap - 1]
        for w, v in zip(weights, values):
            if w <= cap and best[cap - w] + v > b:
                b = best[cap - w] + v
        best[cap] = b
    return best


def build_unbounded_knapsack(weights: Sequence[int], values: Sequence[float]) -> TwoStageInstance:
    """Knapsack with uncertain capacity and no first-stage choice (max-form)."""
    if not weights or len(weights) != len(values):
        raise ValueError("need matching, nonempty weights and values")
    if any(int(w) != w or w <= 0 for w in weights):
        raise ValueError("knapsack weights must be positive integers")
    if any(v < 0 for v in values):
        raise ValueError("knapsack values must be nonnegative")
    weights = tuple(int(w) for w in weights)
    values = tuple(float(v) for v in values)
    table = {"best": knapsack_values(weights, values, 0)}

    def recourse(x, xi):
        if xi[0] < 0:
            raise InfeasibleRecourse("knapsack capacity must be nonnegative")
        cap = int(math.floor(xi[0]))
        if cap >= table["best"].size:
            table["best"] = knapsack_values(weights, values, max(cap, 2 * table["best"].size))
        return float(table["best"][cap])

    return TwoStageInstance(
        name="unbounded-knapsack",
        candidates=[(0.0,)],
        first_stage_cost=lambda x: 0.0,
        recourse=recourse,
        dim=1,
        tags=frozenset({MILP}),
        orientation="max",
        params={"weights": weights, "values": values,
                "rho": max(v / w for w, v in zip(weights, values)),
                "gcd": reduce(math.gcd, weights)},
    )


def build_unit_commitment_toy(gen_costs, pmin, pmax, ramp_up, ramp_down, shed_penalty: float,
                              periods: int, commit_costs=None, candidates=None) -> TwoStageInstance:
    """Commit units (binary, per period) first; dispatch and shed load once demand is known.

    Scenario: demand per period. Decision vector: u flattened unit-major,
    u[i * periods + t].
    """
    c = np.asarray(gen_costs, dtype=float)
    lo, hi = np.asarray(pmin, dtype=float), np.asarray(pmax, dtype=float)
    ru, rd = np.asarray(ramp_up, dtype=float), np.asarray(ramp_down, dtype=float)
    I, T = c.size, int(periods)
    fc = np.zeros(I) if commit_costs is None else np.asarray(commit_costs, dtype=float)
    if candidates is None:
        candidates = list(itertools.product((0.0, 1.0), repeat=I * T))
    nv = I * T + T  # p_it then s_t

    def pidx(i, t):
        return i * T + t

    A_eq = np.zeros((T, nv))
    for t in range(T):
        for i in range(I):
            A_eq[t, pidx(i, t)] = 1.0
        A_eq[t, I * T + t] = 1.0
    rows, ub_static = [], []
    for i in range(I):
        for t in range(T):
            r = np.zeros(nv); r[pidx(i, t)] = 1.0; rows.append(r)      # p <= pmax u
            r = np.zeros(nv); r[pidx(i, t)] = -1.0; rows.append(r)     # -p <= -pmin u
        for t in range(1, T):
            r = np.zeros(nv); r[pidx(i, t)] = 1.0; r[pidx(i, t - 1)] = -1.0; rows.append(r)
            ub_static.append(("up", i))
            r = np.zeros(nv); r[pidx(i, t)] = -1.0; r[pidx(i, t - 1)] = 1.0; rows.append(r)
            ub_static.append(("down", i))
    G = np.array(rows)
    obj = np.concatenate([np.repeat(c, T), np.full(T, float(shed_penalty))])

    def model(u, xi):
        u = np.asarray(u).reshape(I, T)
        h = []
        for i in range(I):
            for t in range(T):
                h.append(hi[i] * u[i, t])
                h.append(-lo[i] * u[i, t])
            for t in range(1, T):
                h.append(ru[i])
                h.append(rd[i])
        return LpModel(LinearProgram(obj, A_eq, np.asarray(xi.coords), G, np.array(h)),
                       scenario_rows=tuple(range(T)))

    return TwoStageInstance(
        name="unit-commitment",
        candidates=candidates,
        first_stage_cost=lambda u: float(np.asarray(u).reshape(I, T).sum(axis=1) @ fc),
        recourse=None,
        dim=T,
        tags=frozenset({CONTINUOUS}),
        params={"gen_costs": c, "pmin": lo, "pmax": hi, "ramp_up": ru, "ramp_down": rd,
                "shed_penalty": float(shed_penalty), "periods": T},
        lp_model=model,
    )


def build_network_design_toy(n_nodes: int, arcs: Sequence[tuple[int, int]], arc_costs, capacities,
                             designable: Sequence[bool], demand_base, demand_matrix,
                             open_costs=None, candidates=None) -> TwoStageInstance:
    """Single-commodity network design with integer flows.

    ``demand_base + demand_matrix @ xi`` gives each node's net outflow
    (supply positive, demand negative); flow conservation reads
    out(v) - in(v) = d_v(xi). Designable arcs are opened by x; the others are
    always open. Q is computed by enumerating integer arc flows.
    """
    arcs = [(int(a), int(b)) for a, b in arcs]
    qa = np.asarray(arc_costs, dtype=float)
    u = np.asarray(capacities, dtype=float)
    if any(int(v) != v for v in u):
        raise ValueError("arc capacities must be integers")
    design = [k for k, flag in enumerate(designable) if flag]
    d0 = np.asarray(demand_base, dtype=float)
    D = np.asarray(demand_matrix, dtype=float).reshape(n_nodes, -1)
    oc = np.zeros(len(design)) if open_costs is None else np.asarray(open_costs, dtype=float)
    if candidates is None:
        candidates = list(itertools.product((0.0, 1.0), repeat=len(design)))
    nA = len(arcs)
    N = np.zeros((n_nodes, nA))
    for k, (a, b) in enumerate(arcs):
        N[a, k] += 1.0
        N[b, k] -= 1.0
    box = tuple((0, int(u[k])) for k in range(nA))

    def model(x, xi):
        openness = np.ones(nA)
        openness[design] = np.asarray(x)
        rhs = d0 + D @ np.asarray(xi.coords)
        lp = LinearProgram(qa, N, rhs, np.eye(nA), u * openness)
        return LpModel(lp, tuple(range(nA)), box, tuple(range(n_nodes)))

    return TwoStageInstance(
        name="network-design",
        candidates=candidates,
        first_stage_cost=lambda x: float(oc @ np.asarray(x)),
        recourse=None,
        dim=D.shape[1],
        tags=frozenset({MILP}),
        params={"n_nodes": n_nodes, "arcs": arcs, "arc_costs": qa, "capacities": u,
                "designable": list(designable), "demand_base": d0, "demand_matrix": D},
        lp_model=model,
    )


# ---------------------------------------------------------------------------
# bundled toy instances used by tests, CLI and examples


def toy_fixed_recourse_lp() -> TwoStageInstance:
    """Two-row recourse with shortage/surplus columns and one transfer column.

    Scenario xi in R^2 drives both the right-hand side and the technology
    matrix, so both terms of the sensitivity cost are exercised.
    """
    q = [3.0, 2.0, 1.0, 1.0, 0.5]  # shortage 1, shortage 2, surplus 1, surplus 2, transfer 2->1
    W = [[1.0, 0.0, -1.0, 0.0, 1.0],
         [0.0, 1.0, 0.0, -1.0, -1.0]]
    maps = make_affine_maps(
        h0=[0.0, 0.0], H=[[1.0, 0.0], [0.0, 1.0]],
        T0=[[1.0, 0.0], [0.0, 1.0]],
        Tk=[[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.05]]],
    )
    X = [(a, b) for a in (0.0, 2.0, 4.0, 6.0) for b in (0.0, 2.0, 4.0, 6.0)]
    return build_fixed_recourse_lp(q, W, maps, X, g=lambda x: 0.4 * x[0] + 0.3 * x[1])


def toy_milp_recourse() -> TwoStageInstance:
    """One-row MILP recourse: batches of 3 units (integer) or unit shortage/surplus.

    The batch column makes the LP relaxation strictly weaker, so the
    integrality gap is positive.
    """
    q = [1.5, 1.0, 2.0]  # shortage, surplus, batch of 3
    W = [[1.0, -1.0, 3.0]]
    maps = make_affine_maps(h0=[0.0], H=[[1.0]], T0=[[1.0]])
    return build_fixed_recourse_lp(q, W, maps, [(0.0,), (1.0,), (2.0,)],
                                   g=lambda x: 0.5 * x[0], integer_vars=[2], box=[(0, 5)],
                                   name="milp-recourse")


def toy_cfl(high_capacity: bool = False) -> TwoStageInstance:
    """2 facilities, 3 customers; the capacitated variant binds facility 2."""
    costs = [[4.0, 5.0, 6.0],
             [1.0, 2.0, 1.5]]
    if high_capacity:
        return build_cfl_single_source(costs, [100.0, 100.0], candidates=[(1.0, 1.0)],
                                       opening_costs=[2.0, 3.0])
    return build_cfl_single_source(costs, [12.0, 5.0], candidates=[(1.0, 0.0), (1.0, 1.0)],
                                   opening_costs=[2.0, 3.0])


def toy_knapsack() -> TwoStageInstance:
    return build_unbounded_knapsack((6, 9, 15), (30.0, 36.0, 45.0))


def toy_unit_commitment() -> TwoStageInstance:
    return build_unit_commitment_toy(
        gen_costs=[2.0, 5.0], pmin=[0.0, 1.0], pmax=[6.0, 4.0],
        ramp_up=[3.0, 4.0], ramp_down=[3.0, 4.0], shed_penalty=20.0, periods=2,
        commit_costs=[1.0, 0.5],
    )


def toy_network_design() -> TwoStageInstance:
    """Nodes s=0, a=1, b=2, t=3; xi = (demand at t, demand at b)."""
    arcs = [(0, 1), (1, 3), (1, 2), (2, 3), (0, 3), (0, 2)]
    return build_network_design_toy(
        n_nodes=4, arcs=arcs,
        arc_costs=[1.0, 1.0, 1.0, 1.0, 8.0, 6.0],
        capacities=[3, 2, 2, 2, 3, 2],
        designable=[True, True, True, True, False, False],
        demand_base=[0.0, 0.0, 0.0, 0.0],
        demand_matrix=[[1.0, 1.0], [0.0, 0.0], [0.0, -1.0], [-1.0, 0.0]],
        open_costs=[1.0, 1.0, 0.5, 0.5],
    )
