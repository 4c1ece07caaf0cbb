"""Regret matrices, regret-domination certificates and related estimators."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .costs import cost_cfl, cost_lp_sensitivity, lp_sensitivity_constants
from .errors import ShapeMismatch
from .measures import Scenario, as_scenario
from .otsolve import CostMatrix
from .problems import TwoStageInstance

CERT_TOL = 1e-9
LP_DOMINATION_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class RegretMatrix:
    """R[i, j] = max over X of L(x, xi_i) - L(x, xi'_j), in min-form."""

    entries: np.ndarray
    row_support: tuple[Scenario, ...]
    col_support: tuple[Scenario, ...]
    argmax: np.ndarray  # candidate index attaining each entry

    @property
    def shape(self):
        return self.entries.shape


def regret_matrix(instance: TwoStageInstance, rows, cols=None) -> RegretMatrix:
    rows = tuple(as_scenario(s) for s in rows)
    cols = rows if cols is None else tuple(as_scenario(s) for s in cols)
    Lr = instance.loss_table(rows)
    Lc = Lr if cols == rows else instance.loss_table(cols)
    diff = Lr[:, :, None] - Lc[:, None, :]  # (K, n, m)
    k = np.argmax(diff, axis=0)
    R = np.take_along_axis(diff, k[None], axis=0)[0]
    ci = {a: j for j, a in enumerate(cols)}
    for i, a in enumerate(rows):
        if a in ci:
            R[i, ci[a]] = 0.0
    R.setflags(write=False)
    return RegretMatrix(R, rows, cols, k)


@dataclass(frozen=True)
class DominationCertificate:
    beta_hat: float
    argmax_pair: Optional[tuple[int, int]]
    violations: tuple[tuple[int, int], ...]
    support: tuple[Scenario, ...] = ()
    estimated: bool = False
    convention_notes: str = (
        "ratio max(R,0)/c; R <= 1e-9 ignored; R > 0 with c = 0 is a violation; c = inf contributes 0"
    )

    @property
    def valid(self) -> bool:
        return not self.violations


def certify_domination(R: RegretMatrix, C: CostMatrix, tol: float = CERT_TOL) -> DominationCertificate:
    """Smallest beta with R <= beta * c on every pair, or the pairs where none exists."""
    Re = R.entries if isinstance(R, RegretMatrix) else np.asarray(R, dtype=float)
    Ce = C.entries if isinstance(C, CostMatrix) else np.asarray(C, dtype=float)
    if Re.shape != Ce.shape:
        raise ShapeMismatch(f"regret {Re.shape} vs cost {Ce.shape}")
    positive = Re > tol
    violations = tuple((int(i), int(j)) for i, j in np.argwhere(positive & (Ce == 0)))
    usable = positive & (Ce > 0) & np.isfinite(Ce)
    ratio = np.zeros_like(Re)
    ratio[usable] = Re[usable] / Ce[usable]
    if usable.any():
        flat = int(np.argmax(ratio))
        beta = float(ratio.flat[flat])
        pair = tuple(int(v) for v in np.unravel_index(flat, ratio.shape))
    else:
        beta, pair = 0.0, None
    support = R.row_support if isinstance(R, RegretMatrix) else ()
    estimated = bool(getattr(C, "estimated", False))
    return DominationCertificate(beta, pair, violations, support, estimated)


@dataclass(frozen=True)
class DominationReport:
    holds: bool
    pairs: int
    failures: tuple[tuple[int, int], ...]
    max_excess: float
    min_slack: float
    mean_slack: float
    tight_pairs: int = 0
    details: dict = field(default_factory=dict)


def _compare(lhs: np.ndarray, bound: np.ndarray, tol: float, tight_tol: float = 1e-9) -> DominationReport:
    excess = lhs - bound
    fails = tuple((int(i), int(j)) for i, j in np.argwhere(excess > tol))
    slack = bound - lhs
    off = ~np.eye(*lhs.shape, dtype=bool) if lhs.shape[0] == lhs.shape[1] else np.ones(lhs.shape, bool)
    tight = int(np.sum((np.abs(excess) <= tight_tol) & off & (bound > 0)))
    return DominationReport(not fails, int(lhs.size), fails, float(excess.max()),
                            float(slack.min()), float(slack.mean()), tight)


def verify_lp_sensitivity_domination(instance: TwoStageInstance, rows, cols=None,
                                     tol: float = LP_DOMINATION_TOL) -> DominationReport:
    """Check R <= c_LP (beta = 1) on every pair of the given supports."""
    M, Rx = lp_sensitivity_constants(instance)
    C = cost_lp_sensitivity(instance.params["maps"], M, Rx, rows, cols)
    R = regret_matrix(instance, rows, cols)
    rep = _compare(R.entries, C.entries, tol)
    return DominationReport(rep.holds, rep.pairs, rep.failures, rep.max_excess, rep.min_slack,
                            rep.mean_slack, rep.tight_pairs, {"M_pi": M, "R": Rx})


def verify_cfl_domination(instance: TwoStageInstance, rows, cols=None, mode: str = "max",
                          tol: float = CERT_TOL) -> DominationReport:
    """Check |Q(y, xi) - Q(y, xi')| <= sum_j cbar_j |xi_j - xi'_j| for every candidate y."""
    rows = tuple(as_scenario(s) for s in rows)
    cols = rows if cols is None else tuple(as_scenario(s) for s in cols)
    C = cost_cfl(instance, rows, cols, mode).entries
    Qr = np.array([[instance.Q(y, s) for s in rows] for y in instance.candidates])
    Qc = np.array([[instance.Q(y, s) for s in cols] for y in instance.candidates])
    gap = np.abs(Qr[:, :, None] - Qc[:, None, :]).max(axis=0)
    rep = _compare(gap, C, tol)
    worst = None
    if rep.failures:
        i, j = np.unravel_index(int(np.argmax(gap - C)), C.shape)
        worst = (rows[i].coords, cols[j].coords, float(gap[i, j]), float(C[i, j]))
    return DominationReport(rep.holds, rep.pairs, rep.failures, rep.max_excess, rep.min_slack,
                            rep.mean_slack, rep.tight_pairs,
                            {"mode": mode, "tight_attained": rep.tight_pairs > 0, "worst_pair": worst})


@dataclass(frozen=True)
class GapEstimate:
    gamma_hat: float
    grid_size: int
    argmax: Optional[tuple]
    estimated: bool = True

    def __float__(self):
        return self.gamma_hat


GAP_SNAP = 1e-9


def estimate_integrality_gap(instance: TwoStageInstance, grid: Sequence[tuple]) -> float:
    """max over (x, xi) in the grid of Q_MILP - Q_LP-relaxation (a lower bound on the true sup)."""
    return integrality_gap_estimate(instance, grid).gamma_hat


def integrality_gap_estimate(instance: TwoStageInstance, grid: Sequence[tuple]) -> GapEstimate:
    if instance.lp_model is None:
        return GapEstimate(0.0, len(grid), None)
    best, arg = 0.0, None
    for x, s in grid:
        gap = instance.Q(x, s) - instance.relaxation_value(x, s)
        if gap > best:
            best, arg = gap, (tuple(x), as_scenario(s).coords)
    if best <= GAP_SNAP:
        best = 0.0
    return GapEstimate(best, len(grid), arg)


def estimate_lipschitz_constant(instance: TwoStageInstance, support) -> float:
    """Empirical max over X and support pairs of |L(x, xi) - L(x, xi')| / ||xi - xi'||."""
    support = tuple(as_scenario(s) for s in support)
    L = instance.loss_table(support)
    P = np.array([s.coords for s in support])
    D = np.linalg.norm(P[:, None, :] - P[None, :, :], axis=2)
    diff = np.abs(L[:, :, None] - L[:, None, :]).max(axis=0)
    mask = D > 0
    return float((diff[mask] / D[mask]).max()) if mask.any() else 0.0
