"""Check |v(P) - v(nu)| against beta times the transport cost, in both directions."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .costs import GroundCostSpec, build_cost
from .errors import CertificateMissing, NotSymmetric, SupportMismatch
from .measures import DiscreteDistribution, union_support
from .otsolve import CostMatrix, transport_cost
from .problems import TwoStageInstance, expected_value
from .regret import DominationCertificate, certify_domination, regret_matrix

STABILITY_TOL = 1e-7


@dataclass(frozen=True)
class StabilityReport:
    v_P: float
    v_nu: float
    T_PQ: float
    T_QP: float
    beta: float
    lhs_forward: float
    lhs_backward: float
    bound_forward: float
    bound_backward: float
    forward_pass: bool
    backward_pass: bool
    abs_pass: bool
    taint: str = "exact"
    tol: float = STABILITY_TOL
    shortcut: bool = False

    @property
    def passed(self) -> bool:
        return self.forward_pass and self.backward_pass and self.abs_pass

    @property
    def abs_lhs(self) -> float:
        return abs(self.v_P - self.v_nu)

    @property
    def abs_bound(self) -> float:
        return max(self.bound_forward, self.bound_backward)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def render(self) -> str:
        def verdict(ok):
            return "pass" if ok else "FAIL"

        lines = [
            f"v(P)             = {self.v_P:.10g}",
            f"v(nu)            = {self.v_nu:.10g}",
            f"T_c(P, nu)       = {self.T_PQ:.10g}",
            f"T_c(nu, P)       = {self.T_QP:.10g}",
            f"beta             = {self.beta:.10g}  [{self.taint}]",
            f"forward          : {self.lhs_forward:.10g} <= {self.bound_forward:.10g}  {verdict(self.forward_pass)}",
            f"backward         : {self.lhs_backward:.10g} <= {self.bound_backward:.10g}  {verdict(self.backward_pass)}",
            f"absolute         : {self.abs_lhs:.10g} <= {self.abs_bound:.10g}  {verdict(self.abs_pass)}",
        ]
        return "\n".join(lines)


def _bound(beta: float, T: float) -> float:
    return math.inf if math.isinf(T) or math.isinf(beta) else beta * T


def _resolve_beta(certificate, beta, union) -> tuple[float, bool]:
    if certificate is None:
        if beta is None:
            raise CertificateMissing("a domination certificate (or a structural beta) is required")
        return float(beta), False
    if certificate.violations:
        raise CertificateMissing(f"certificate has {len(certificate.violations)} violating pairs; no finite beta")
    if not set(union) <= set(certificate.support):
        raise SupportMismatch("certificate was not computed on supp(P) u supp(nu)")
    b = certificate.beta_hat if beta is None else float(beta)
    return b, certificate.estimated


def _costs_for(C: CostMatrix, P, nu):
    if C.row_support is None or C.col_support is None:
        if C.entries.shape != (len(P), len(nu)):
            raise SupportMismatch("unlabelled cost must be |P| x |nu|")
        return C, None
    try:
        fwd = C.submatrix(P.atoms, nu.atoms)
        bwd = C.submatrix(nu.atoms, P.atoms)
    except KeyError as exc:
        raise SupportMismatch(f"cost support is missing atom {exc}") from None
    return fwd, bwd


def _report(instance, P, nu, beta, T_PQ, T_QP, taint, tol, shortcut=False) -> StabilityReport:
    vP, _ = expected_value(instance, P)
    vN, _ = expected_value(instance, nu)
    bf, bb = _bound(beta, T_PQ), _bound(beta, T_QP)
    lf, lb = vP - vN, vN - vP
    return StabilityReport(
        vP, vN, T_PQ, T_QP, beta, lf, lb, bf, bb,
        lf <= bf + tol, lb <= bb + tol, abs(vP - vN) <= max(bf, bb) + tol,
        taint, tol, shortcut,
    )


def check_stability(instance: TwoStageInstance, P: DiscreteDistribution, nu: DiscreteDistribution,
                    C: CostMatrix, certificate: Optional[DominationCertificate] = None,
                    beta: Optional[float] = None, tol: float = STABILITY_TOL) -> StabilityReport:
    """Evaluate both directed inequalities and the absolute one.

    ``C`` is a labelled cost covering supp(P) u supp(nu) in both roles.
    ``beta`` overrides the certificate value for structural cases (beta = 1).
    """
    union = union_support(P, nu)
    b, estimated = _resolve_beta(certificate, beta, union)
    fwd, bwd = _costs_for(C, P, nu)
    if bwd is None:
        raise SupportMismatch("two-sided check needs a cost labelled with both supports")
    T_PQ = transport_cost(P, nu, fwd).cost
    T_QP = transport_cost(nu, P, bwd).cost
    taint = "estimate" if (estimated or C.estimated) else "exact"
    return _report(instance, P, nu, b, T_PQ, T_QP, taint, tol)


def check_symmetric_shortcut(instance: TwoStageInstance, P: DiscreteDistribution, nu: DiscreteDistribution,
                             C: CostMatrix, certificate: Optional[DominationCertificate] = None,
                             beta: Optional[float] = None, tol: float = STABILITY_TOL) -> StabilityReport:
    """Same check with a single transport solve, valid for symmetric costs."""
    union = union_support(P, nu)
    b, estimated = _resolve_beta(certificate, beta, union)
    if C.row_support is None:
        raise NotSymmetric("symmetry needs a labelled cost")
    try:
        sub = C.submatrix(union, union)
    except KeyError as exc:
        raise SupportMismatch(f"cost support is missing atom {exc}") from None
    if not sub.symmetric_flag:
        raise NotSymmetric("cost is not symmetric on supp(P) u supp(nu)")
    T = transport_cost(P, nu, sub.submatrix(P.atoms, nu.atoms)).cost
    taint = "estimate" if (estimated or C.estimated) else "exact"
    return _report(instance, P, nu, b, T, T, taint, tol, shortcut=True)


@dataclass(frozen=True)
class PipelineResult:
    report: StabilityReport
    certificate: DominationCertificate
    cost: CostMatrix


def stability_pipeline(instance: TwoStageInstance, P: DiscreteDistribution, nu: DiscreteDistribution,
                       spec: GroundCostSpec, tol: float = STABILITY_TOL, grid=None) -> PipelineResult:
    """Build the cost and certificate on supp(P) u supp(nu), then run the two-sided check."""
    union = union_support(P, nu)
    C = build_cost(spec, instance, union, union, grid=grid)
    cert = certify_domination(regret_matrix(instance, union), C)
    if cert.violations:
        raise CertificateMissing(f"{spec.kind} cost does not dominate regret on {len(cert.violations)} pairs")
    return PipelineResult(check_stability(instance, P, nu, C, cert, tol=tol), cert, C)
