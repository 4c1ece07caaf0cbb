"""Ground-cost constructors.

Each builder evaluates c(xi, xi') on ``rows x cols`` and returns a
:class:`CostMatrix` labelled with both supports. When ``cols`` is omitted the
cost is built on ``rows x rows``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, ShapeMismatch
from .lp import dual_inf_norm_bound
from .measures import Scenario, as_scenario
from .otsolve import CostMatrix, norm_cost_entries
from .problems import AffineMaps, TwoStageInstance, optimal_first_stage_index

COST_KINDS = (
    "Norm", "BM", "BMSymmetrized", "AvgRegret", "Composite", "LpSensitivity", "MilpGap",
    "CflMax", "CflMin", "KnapsackStepwise", "KnapsackLinear", "UnitCommitment", "NetworkDesign",
)


def _supports(rows, cols):
    rows = tuple(as_scenario(s) for s in rows)
    cols = rows if cols is None else tuple(as_scenario(s) for s in cols)
    if rows and cols and rows[0].dim != cols[0].dim:
        raise DimensionMismatch("row and column supports have different dimensions")
    return rows, cols


def _points(sup) -> np.ndarray:
    return np.array([s.coords for s in sup], dtype=float)


def _zero_shared_diagonal(C: np.ndarray, rows, cols) -> np.ndarray:
    ci = {a: j for j, a in enumerate(cols)}
    for i, a in enumerate(rows):
        j = ci.get(a)
        if j is not None:
            C[i, j] = 0.0
    return C


def _finish(C, rows, cols, kind, estimated=False) -> CostMatrix:
    C = np.maximum(np.asarray(C, dtype=float), 0.0)  # clears -0.0 and rounding dust
    return CostMatrix(_zero_shared_diagonal(C, rows, cols), rows, cols, estimated, kind)


def cost_norm(rows, cols=None) -> CostMatrix:
    """Euclidean distance ||xi - xi'||."""
    rows, cols = _supports(rows, cols)
    return _finish(norm_cost_entries(_points(rows), _points(cols)), rows, cols, "Norm")


def _objective_table(instance: TwoStageInstance, support) -> np.ndarray:
    """F[k, i] = g(x_k) + L(x_k, xi_i)."""
    return instance.first_stage_costs()[:, None] + instance.loss_table(support)


def bm_regret_term(instance: TwoStageInstance, xi, xi_prime, x_star=None, x_star_prime=None) -> float:
    """F(x*(xi'), xi) - F(x*(xi), xi): the decision-regret part of the BM cost.

    ``x_star``/``x_star_prime`` override the computed minimizers.
    """
    xi, xi_prime = as_scenario(xi), as_scenario(xi_prime)
    if x_star is None:
        x_star = instance.candidates[optimal_first_stage_index(instance, xi)]
    if x_star_prime is None:
        x_star_prime = instance.candidates[optimal_first_stage_index(instance, xi_prime)]
    return instance.objective(x_star_prime, xi) - instance.objective(x_star, xi)


def _bm_regret(instance, rows, cols) -> np.ndarray:
    F_rows = _objective_table(instance, rows)
    star_rows = np.argmin(F_rows, axis=0)
    star_cols = np.argmin(_objective_table(instance, cols), axis=0)
    n = len(rows)
    # F_rows[x*(xi'_j), i] - F_rows[x*(xi_i), i]
    return F_rows[star_cols[None, :], np.arange(n)[:, None]] - F_rows[star_rows, np.arange(n)][:, None]


def cost_bm(instance: TwoStageInstance, rows, cols=None, alpha: float = 1.0) -> CostMatrix:
    """F(x*(xi'), xi) - F(x*(xi), xi) + alpha ||xi - xi'||, with F = g + L."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    rows, cols = _supports(rows, cols)
    C = _bm_regret(instance, rows, cols) + alpha * norm_cost_entries(_points(rows), _points(cols))
    return _finish(C, rows, cols, "BM")


def cost_bm_symmetrized(instance: TwoStageInstance, rows, cols=None, alpha: float = 1.0) -> CostMatrix:
    rows, cols = _supports(rows, cols)
    forward = cost_bm(instance, rows, cols, alpha).entries
    backward = cost_bm(instance, cols, rows, alpha).entries
    return _finish(0.5 * (forward + backward.T), rows, cols, "BMSymmetrized")


def cost_avg_regret(instance: TwoStageInstance, panel: Sequence, rows, cols=None) -> CostMatrix:
    """(1/K) sum_k |L(x_k, xi) - L(x_k, xi')| over a decision panel."""
    if not panel:
        raise ValueError("decision panel must be nonempty")
    rows, cols = _supports(rows, cols)
    Lr = np.array([[instance.loss(x, s) for s in rows] for x in panel])
    Lc = np.array([[instance.loss(x, s) for s in cols] for x in panel])
    C = np.abs(Lr[:, :, None] - Lc[:, None, :]).mean(axis=0)
    return _finish(C, rows, cols, "AvgRegret")


def cost_composite(instance: TwoStageInstance, rows, cols=None, alpha: float = 1.0,
                   beta_w: float = 0.0, gamma_w: float = 0.0) -> CostMatrix:
    """alpha ||dxi|| + beta_w ||x*(xi) - x*(xi')|| + gamma_w * c_BM."""
    if not alpha > 0 or beta_w < 0 or gamma_w < 0:
        raise ValueError("need alpha > 0 and nonnegative beta_w, gamma_w")
    rows, cols = _supports(rows, cols)
    D = norm_cost_entries(_points(rows), _points(cols))
    X = np.array(instance.candidates)
    xr = X[np.argmin(_objective_table(instance, rows), axis=0)]
    xc = X[np.argmin(_objective_table(instance, cols), axis=0)]
    C = alpha * D + beta_w * norm_cost_entries(xr, xc)
    if gamma_w:
        C = C + gamma_w * (_bm_regret(instance, rows, cols) + alpha * D)
    return _finish(C, rows, cols, "Composite")


def lp_sensitivity_constants(instance: TwoStageInstance) -> tuple[float, float]:
    """(M_pi, R) for a fixed-recourse LP instance: dual sup-norm bound and max ||x||_inf."""
    p = instance.params
    if "W" not in p:
        raise TypeError(f"{instance.name} is not a fixed-recourse instance")
    M = dual_inf_norm_bound(p["W"], p["q"])
    R = max(max(abs(v) for v in x) for x in instance.candidates)
    return M, R


def _h_T_differences(maps: AffineMaps, rows, cols):
    Pr, Pc = _points(rows), _points(cols)
    H = maps.H
    dh = np.abs((Pr @ H.T)[:, None, :] - (Pc @ H.T)[None, :, :]).sum(axis=2)
    # T(xi) - T(xi') = sum_k (xi_k - xi'_k) T_k; entrywise 1-norm bounds the inf->1 operator norm
    diff = Pr[:, None, :] - Pc[None, :, :]
    dT = np.abs(np.tensordot(diff, maps.Tk, axes=([2], [0]))).sum(axis=(2, 3))
    return dh, dT


def cost_lp_sensitivity(maps: AffineMaps, M_pi: float, R: float, rows, cols=None) -> CostMatrix:
    """M_pi * (||h(xi) - h(xi')||_1 + R * ||T(xi) - T(xi')||_1)."""
    if not (M_pi >= 0 and R >= 0) or math.isinf(M_pi):
        raise ValueError("M_pi must be finite and nonnegative, R nonnegative")
    rows, cols = _supports(rows, cols)
    dh, dT = _h_T_differences(maps, rows, cols)
    return _finish(M_pi * (dh + R * dT), rows, cols, "LpSensitivity")


def cost_milp_gap(maps: AffineMaps, M_pi: float, R: float, gamma_hat: float, rows, cols=None,
                  estimated: bool = True) -> CostMatrix:
    """LP-sensitivity cost plus gamma_hat off the diagonal (diagonal forced to 0)."""
    if gamma_hat < 0:
        raise ValueError("gamma_hat must be nonnegative")
    base = cost_lp_sensitivity(maps, M_pi, R, rows, cols)
    C = base.entries + gamma_hat
    return _finish(C, base.row_support, base.col_support, "MilpGap", estimated)


def cost_cfl(instance: TwoStageInstance, rows, cols=None, mode: str = "max") -> CostMatrix:
    """sum_j cbar_j |xi_j - xi'_j| with cbar_j the max (or min) cost over facilities."""
    if mode not in ("max", "min"):
        raise ValueError("mode must be 'max' or 'min'")
    c = np.asarray(instance.params["costs"])
    cbar = c.max(axis=0) if mode == "max" else c.min(axis=0)
    return _weighted_abs_cost(cbar, rows, cols, "CflMax" if mode == "max" else "CflMin")


def _weighted_abs_cost(weights, rows, cols, kind, estimated=False, affine: Optional[np.ndarray] = None):
    rows, cols = _supports(rows, cols)
    Pr, Pc = _points(rows), _points(cols)
    if affine is not None:
        Pr, Pc = Pr @ affine.T, Pc @ affine.T
    w = np.asarray(weights, dtype=float)
    if w.shape != (Pr.shape[1],):
        raise ShapeMismatch(f"need {Pr.shape[1]} weights, got {w.shape}")
    C = (np.abs(Pr[:, None, :] - Pc[None, :, :]) * w).sum(axis=2)
    return _finish(C, rows, cols, kind, estimated)


def knapsack_rho_gcd(weights, values) -> tuple[float, int]:
    rho = max(v / w for w, v in zip(weights, values))
    return rho, math.gcd(*[int(w) for w in weights])


def cost_knapsack(weights, values, rows, cols=None, mode: str = "stepwise") -> CostMatrix:
    """stepwise: rho*g*(floor(max/g) - floor(min/g)); linear: rho*|xi - xi'|."""
    if mode not in ("stepwise", "linear"):
        raise ValueError("mode must be 'stepwise' or 'linear'")
    rho, g = knapsack_rho_gcd(weights, values)
    rows, cols = _supports(rows, cols)
    a, b = _points(rows)[:, 0][:, None], _points(cols)[:, 0][None, :]
    if mode == "linear":
        C = rho * np.abs(a - b)
    else:
        C = rho * g * (np.floor(np.maximum(a, b) / g) - np.floor(np.minimum(a, b) / g))
    return _finish(C, rows, cols, "KnapsackStepwise" if mode == "stepwise" else "KnapsackLinear")


def cost_unit_commitment(pi_bar, rows, cols=None, estimated: bool = True) -> CostMatrix:
    """sum_t pibar_t |D_t - D'_t|; the scenario is the demand path."""
    return _weighted_abs_cost(pi_bar, rows, cols, "UnitCommitment", estimated)


def cost_network_design(pi_bar, demand_matrix, rows, cols=None, estimated: bool = True) -> CostMatrix:
    """sum_v pibar_v |d_v(xi) - d_v(xi')| with d(xi) = d0 + D xi (d0 cancels)."""
    return _weighted_abs_cost(pi_bar, rows, cols, "NetworkDesign", estimated,
                              affine=np.asarray(demand_matrix, dtype=float))


def dual_price_bounds(instance: TwoStageInstance, grid: Sequence) -> np.ndarray:
    """Max |dual| per scenario row over X x grid (an estimate of the dual price sup)."""
    best = None
    for x in instance.candidates:
        for s in grid:
            d = np.abs(instance.scenario_duals(x, s))
            best = d if best is None else np.maximum(best, d)
    return best


@dataclass(frozen=True)
class GroundCostSpec:
    """A cost kind plus its parameters, as given in an instance file."""

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in COST_KINDS:
            raise ValueError(f"unknown cost kind {self.kind!r}")
        for key, val in self.params.items():
            if isinstance(val, (int, float)) and val < 0:
                raise ValueError(f"cost parameter {key} must be nonnegative")


def build_cost(spec: GroundCostSpec, instance: TwoStageInstance, rows, cols=None,
               grid: Optional[Sequence] = None) -> CostMatrix:
    """Evaluate a cost spec on rows x cols.

    ``grid`` is the evaluation grid for estimated constants (dual prices,
    integrality gap); it defaults to the union of both supports.
    """
    p = spec.params
    kind = spec.kind
    rows, cols = _supports(rows, cols)
    if grid is None:
        grid = tuple(dict.fromkeys(rows + cols))
    if kind == "Norm":
        return cost_norm(rows, cols)
    if kind == "BM":
        return cost_bm(instance, rows, cols, p.get("alpha", 1.0))
    if kind == "BMSymmetrized":
        return cost_bm_symmetrized(instance, rows, cols, p.get("alpha", 1.0))
    if kind == "AvgRegret":
        panel = p.get("panel") or list(instance.candidates)
        return cost_avg_regret(instance, panel, rows, cols)
    if kind == "Composite":
        return cost_composite(instance, rows, cols, p.get("alpha", 1.0), p.get("beta", 0.0), p.get("gamma", 0.0))
    if kind in ("LpSensitivity", "MilpGap"):
        M, R = lp_sensitivity_constants(instance)
        M, R = p.get("M_pi", M), p.get("R", R)
        if kind == "LpSensitivity":
            return cost_lp_sensitivity(instance.params["maps"], M, R, rows, cols)
        from .regret import estimate_integrality_gap

        gamma = p.get("gamma_hat")
        if gamma is None:
            gamma = estimate_integrality_gap(instance, [(x, s) for x in instance.candidates for s in grid])
        return cost_milp_gap(instance.params["maps"], M, R, gamma, rows, cols)
    if kind in ("CflMax", "CflMin"):
        return cost_cfl(instance, rows, cols, "max" if kind == "CflMax" else "min")
    if kind in ("KnapsackStepwise", "KnapsackLinear"):
        mode = "stepwise" if kind == "KnapsackStepwise" else "linear"
        return cost_knapsack(instance.params["weights"], instance.params["values"], rows, cols, mode)
    if kind == "UnitCommitment":
        pi = p.get("pi_bar")
        estimated = pi is None
        if pi is None:
            pi = dual_price_bounds(instance, grid)
        return cost_unit_commitment(pi, rows, cols, estimated)
    pi = p.get("pi_bar")
    estimated = pi is None
    if pi is None:
        pi = dual_price_bounds(instance, grid)
    return cost_network_design(pi, instance.params["demand_matrix"], rows, cols, estimated)


@dataclass(frozen=True)
class GroundCostReport:
    nonnegative: bool
    proper: bool
    zero_diagonal: bool
    symmetric: bool
    triangle_holds: Optional[bool]
    violating_triple: Optional[tuple[int, int, int]] = None
    triangle_excess: float = 0.0

    @property
    def valid(self) -> bool:
        return self.nonnegative and self.proper and self.zero_diagonal


def validate_ground_cost(C: CostMatrix, tol: float = 1e-9) -> GroundCostReport:
    """Check the ground-cost axioms and report symmetry and the triangle inequality.

    The triangle check needs a square matrix on one support; it reports the
    triple (i, j, k) maximising c(i,k) - c(i,j) - c(j,k).
    """
    E = C.entries
    nonneg = bool(np.all(E >= 0))
    proper = bool(np.isfinite(E).any())
    if C.row_support is not None and C.col_support is not None:
        ci = {a: j for j, a in enumerate(C.col_support)}
        diag = [E[i, ci[a]] for i, a in enumerate(C.row_support) if a in ci]
    else:
        diag = list(np.diag(E)) if E.shape[0] == E.shape[1] else []
    zero_diag = all(d == 0 for d in diag)
    square = E.shape[0] == E.shape[1] and (C.row_support is None or C.row_support == C.col_support)
    if not square:
        return GroundCostReport(nonneg, proper, zero_diag, False, None)
    with np.errstate(invalid="ignore"):
        excess = E[:, None, :] - E[:, :, None] - E[None, :, :]  # [i, j, k] = c(i,k) - c(i,j) - c(j,k)
    excess = np.nan_to_num(excess, nan=-np.inf, posinf=np.inf, neginf=-np.inf)
    flat = int(np.argmax(excess))
    worst = float(excess.flat[flat])
    if worst > tol:
        i, j, k = np.unravel_index(flat, excess.shape)
        return GroundCostReport(nonneg, proper, zero_diag, C.symmetric_flag, False,
                                (int(i), int(j), int(k)), worst)
    return GroundCostReport(nonneg, proper, zero_diag, C.symmetric_flag, True)
