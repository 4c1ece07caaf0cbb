"""Acceptance criteria 1-11. Each test prints one PASS/FAIL line.

Run directly (``python tests/test_acceptance.py``) for the summary without pytest.
"""

from __future__ import annotations

import contextlib
import itertools
import sys

import numpy as np
import pytest

from oracles import best_permutation_cost
from scenred.costs import (
    GroundCostSpec,
    bm_regret_term,
    build_cost,
    cost_knapsack,
    cost_lp_sensitivity,
    lp_sensitivity_constants,
    validate_ground_cost,
    cost_bm,
)
from scenred.instance_file import bundled_instance_names, load_bundled
from scenred.measures import random_distribution, uniform, union_support
from scenred.otsolve import fm1_lower_bound, transport_cost, wasserstein_p
from scenred.problems import (
    build_newsvendor,
    toy_cfl,
    toy_fixed_recourse_lp,
    toy_knapsack,
    toy_milp_recourse,
    toy_network_design,
    toy_unit_commitment,
)
from scenred.reduce import reduce_exhaustive, reduce_greedy, reduction_stability_audit
from scenred.regret import certify_domination, integrality_gap_estimate, regret_matrix, verify_cfl_domination
from scenred.stability import check_stability, check_symmetric_shortcut

_capsys = None


@pytest.fixture(autouse=True)
def _grab_capsys(capsys):
    global _capsys
    _capsys = capsys
    yield
    _capsys = None


def report(number: int, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
    ctx = _capsys.disabled() if _capsys is not None else contextlib.nullcontext()
    with ctx:
        print(line)


def test_criterion_01_knapsack_numbers():
    inst = toy_knapsack()
    w, v = inst.params["weights"], inst.params["values"]
    q = [inst.Q((0,), (c,)) for c in (12, 13, 14)]
    R = regret_matrix(inst, [(14.0,), (13.0,)]).entries[0, 1]
    step = cost_knapsack(w, v, [(14,)], [(13,)], "stepwise").entries[0, 0]
    lin = cost_knapsack(w, v, [(14,)], [(13,)], "linear").entries[0, 0]
    ok = q == [60.0, 60.0, 60.0] and R == 0.0 and step == 0.0 and lin == 5.0
    report(1, ok, f"Q(12..14)={q}, R(14,13)={R:g}, stepwise={step:g}, linear={lin:g}")
    assert ok


def test_criterion_02_inventory_bm_term():
    inst = build_newsvendor(0.0, 1.0, 1.0, [12, 18])
    term = bm_regret_term(inst, (10,), (20,), x_star=(12,), x_star_prime=(18,))
    ok = abs(term - 6.0) <= 1e-12
    report(2, ok, f"directed BM regret term at (10,20) = {term!r} (expected 6)")
    assert ok


def _theorem_matrix():
    """(instance, candidate scenarios, cost spec, evaluation grid) combinations."""
    nv = build_newsvendor(0.2, 1.0, 3.0, range(0, 31, 2))
    nv_pts = [(float(v),) for v in range(31)]
    lp = toy_fixed_recourse_lp()
    lp_pts = [(float(a), float(b)) for a in range(9) for b in range(9)]
    milp = toy_milp_recourse()
    milp_pts = [(float(v),) for v in range(11)]
    cfl, cfl_hc = toy_cfl(), toy_cfl(high_capacity=True)
    cfl_pts = [tuple(float(c) for c in p) for p in itertools.product((1, 2, 3), repeat=3)]
    kn = toy_knapsack()
    kn_pts = [(float(v),) for v in range(31)]
    uc = toy_unit_commitment()
    uc_pts = [(float(a), float(b)) for a in range(1, 9) for b in range(1, 9)]
    nd = toy_network_design()
    nd_pts = [(float(a), float(b)) for a in range(4) for b in range(3)]
    S = GroundCostSpec
    return [
        ("newsvendor", nv, nv_pts, S("Norm"), None),
        ("newsvendor", nv, nv_pts, S("BM", {"alpha": 0.1}), None),
        ("newsvendor", nv, nv_pts, S("BMSymmetrized", {"alpha": 0.2}), None),
        ("newsvendor", nv, nv_pts, S("AvgRegret"), None),
        ("newsvendor", nv, nv_pts, S("Composite", {"alpha": 0.1, "beta": 0.05, "gamma": 1.0}), None),
        ("fixed-recourse-lp", lp, lp_pts, S("LpSensitivity"), None),
        ("fixed-recourse-lp", lp, lp_pts, S("BM", {"alpha": 0.5}), None),
        ("milp-recourse", milp, milp_pts, S("MilpGap"), milp_pts),
        ("milp-recourse", milp, milp_pts, S("Norm"), None),
        ("cfl", cfl, cfl_pts, S("CflMax"), None),
        ("cfl", cfl, cfl_pts, S("CflMin"), None),
        ("cfl", cfl, cfl_pts, S("Composite", {"alpha": 0.3, "beta": 1.0}), None),
        ("cfl-high-capacity", cfl_hc, cfl_pts, S("CflMin"), None),
        ("knapsack", kn, kn_pts, S("KnapsackStepwise"), None),
        ("knapsack", kn, kn_pts, S("KnapsackLinear"), None),
        ("knapsack", kn, kn_pts, S("BM", {"alpha": 1.0}), None),
        ("unit-commitment", uc, uc_pts, S("UnitCommitment"), uc_pts),
        ("unit-commitment", uc, uc_pts, S("AvgRegret"), None),
        ("network-design", nd, nd_pts, S("NetworkDesign"), nd_pts),
        ("network-design", nd, nd_pts, S("BMSymmetrized", {"alpha": 0.5}), None),
    ]


def test_criterion_03_main_theorem_suite():
    rng = np.random.default_rng(2024)
    tuples = certified = failures = 0
    kinds, builders = set(), set()
    for name, inst, pts, spec, grid in _theorem_matrix():
        for _ in range(12):
            P = random_distribution(rng, pts, int(rng.integers(2, 6)))
            nu = random_distribution(rng, pts, int(rng.integers(1, 5)))
            union = union_support(P, nu)
            C = build_cost(spec, inst, union, union, grid=grid)
            cert = certify_domination(regret_matrix(inst, union), C)
            tuples += 1
            kinds.add(spec.kind)
            builders.add(name)
            if cert.violations:
                continue
            certified += 1
            rep = check_stability(inst, P, nu, C, cert)
            ok = rep.forward_pass and rep.backward_pass and rep.abs_pass
            if C.symmetric_flag:
                short = check_symmetric_shortcut(inst, P, nu, C, cert)
                ok &= short.passed and abs(short.bound_forward - rep.bound_forward) <= 1e-9
            failures += not ok
    ok = tuples >= 200 and certified >= 200 and failures == 0
    report(3, ok, f"{tuples} tuples ({certified} certified) over {len(kinds)} cost kinds and "
                  f"{len(builders)} instances, {failures} failures")
    assert ok
    assert len(kinds) == 13


def test_criterion_04_lp_sensitivity_domination():
    inst = toy_fixed_recourse_lp()
    M, Rx = lp_sensitivity_constants(inst)
    maps = inst.params["maps"]
    rng = np.random.default_rng(44)
    failures, worst = 0, -np.inf
    for _ in range(100):
        a, b = tuple(rng.uniform(0, 8, 2)), tuple(rng.uniform(0, 8, 2))
        R = regret_matrix(inst, [a], [b]).entries[0, 0]
        c = cost_lp_sensitivity(maps, M, Rx, [a], [b]).entries[0, 0]
        worst = max(worst, R - c)
        failures += R > c + 1e-7
    ok = failures == 0
    report(4, ok, f"100 pairs x {len(inst.candidates)} decisions, M_pi={M:g}, R={Rx:g}, "
                  f"max(R - c_LP)={worst:.3g}, {failures} failures")
    assert ok


def test_criterion_05_ot_permutation_oracle():
    rng = np.random.default_rng(55)
    worst, count = 0.0, 0
    for n in range(2, 7):
        P, Q = uniform([(float(i),) for i in range(n)]), uniform([(float(i) + 0.5,) for i in range(n)])
        for _ in range(50):
            C = rng.random((n, n)) * 10
            worst = max(worst, abs(transport_cost(P, Q, C).cost - best_permutation_cost(C)))
            count += 1
    ok = worst <= 1e-9
    report(5, ok, f"{count} uniform instances n=2..6, max |solver - permutation| = {worst:.2e}")
    assert ok


def test_criterion_06_wasserstein_ordering():
    rng = np.random.default_rng(66)
    pts = [(float(a), float(b)) for a in range(6) for b in range(6)]
    worst = -np.inf
    for _ in range(100):
        P = random_distribution(rng, pts, int(rng.integers(1, 7)))
        Q = random_distribution(rng, pts, int(rng.integers(1, 7)))
        ws = [wasserstein_p(P, Q, p) for p in (1, 1.5, 2, 3)]
        worst = max(worst, max(a - b for a, b in zip(ws, ws[1:])))
    ok = worst <= 1e-9
    report(6, ok, f"100 pairs, p in (1, 1.5, 2, 3), max W_p - W_q (p<q) = {worst:.2e}")
    assert ok


def test_criterion_07_fm1_lower_bound():
    rng = np.random.default_rng(77)
    pts = [(float(a), float(b)) for a in range(6) for b in range(6)]
    worst = -np.inf
    for _ in range(50):
        P = random_distribution(rng, pts, int(rng.integers(1, 7)))
        Q = random_distribution(rng, pts, int(rng.integers(1, 7)))
        w1 = wasserstein_p(P, Q, 1)
        for _ in range(20):
            k = int(rng.integers(1, 4))
            U = rng.normal(size=(k, 2))
            U /= np.maximum(1.0, np.linalg.norm(U, axis=1))[:, None]
            a = rng.normal(size=k) * 3

            def f(x, U=U, a=a):
                return float(np.max(a + U @ np.asarray(x)))  # max of 1-Lipschitz affine maps

            worst = max(worst, fm1_lower_bound(P, Q, f) - w1)
    ok = worst <= 1e-9
    report(7, ok, f"50 pairs x 20 witnesses, max (lower bound - W_1) = {worst:.2e}")
    assert ok


def test_criterion_08_cfl_bound():
    grid = list(itertools.product((1, 2, 3), repeat=3))
    cap = verify_cfl_domination(toy_cfl(), grid, mode="max")
    hc_max = verify_cfl_domination(toy_cfl(high_capacity=True), grid, mode="max")
    hc_min = verify_cfl_domination(toy_cfl(high_capacity=True), grid, mode="min")
    ok = cap.holds and hc_max.holds and hc_min.holds and cap.pairs >= 400
    detail = (f"capacitated: {len(cap.failures)}/{cap.pairs} pairs violate the max-cost bound"
              f" (worst {cap.details['worst_pair']}); high capacity max/min: "
              f"{len(hc_max.failures)}/{len(hc_min.failures)} violations")
    report(8, ok, detail)
    assert ok, detail


def test_criterion_09_network_design_integrality():
    li = load_bundled("network_design")
    inst = li.instance
    grid = [(x, tuple(float(v) for v in s)) for x in inst.candidates for s in li.grid]
    est = integrality_gap_estimate(inst, grid)
    raw = max(abs(inst.Q(x, s) - inst.relaxation_value(x, s)) for x, s in grid)
    ok = est.gamma_hat == 0.0 and raw <= 1e-9
    report(9, ok, f"gamma_hat = {est.gamma_hat:g} over {est.grid_size} (x, xi) points, max |MILP - LP| = {raw:.1e}")
    assert ok


def test_criterion_10_bm_triangle_violation():
    inst = build_newsvendor(0.2, 1.0, 3.0, range(0, 31, 2))
    rng = np.random.default_rng(10)
    support = [(float(v),) for v in sorted(rng.choice(31, 8, replace=False))]
    C = cost_bm(inst, support, alpha=0.1)
    rep = validate_ground_cost(C)
    ok = rep.triangle_holds is False and rep.violating_triple is not None
    if ok:
        i, j, k = rep.violating_triple
        E = C.entries
        ok = E[i, k] > E[i, j] + E[j, k]
        detail = (f"c({support[i][0]:g},{support[k][0]:g})={E[i, k]:.4g} > "
                  f"c({support[i][0]:g},{support[j][0]:g})+c({support[j][0]:g},{support[k][0]:g})"
                  f"={E[i, j] + E[j, k]:.4g}")
    else:
        detail = "no violating triple found"
    report(10, ok, detail)
    assert ok


def test_criterion_11_reduction_audit():
    lines, ok = [], True
    for name in bundled_instance_names():
        li = load_bundled(name)
        assert len(li.P) == 10
        for m in (2, 3, 5):
            audit = reduction_stability_audit(li.instance, li.P, m, li.cost, grid=li.grid)
            C = build_cost(li.cost, li.instance, li.P.atoms, li.P.atoms, grid=li.grid)
            ex = reduce_exhaustive(li.P, C, m).transport_cost
            gr = reduce_greedy(li.P, C, m).transport_cost
            good = (audit.certificate.valid and audit.redistribution_verified
                    and audit.realized_gap <= audit.bound + 1e-7 and ex <= gr + 1e-12)
            ok &= good
            if not good:
                lines.append(f"{name} m={m}")
    report(11, ok, f"{len(bundled_instance_names())} bundled instances x m in (2,3,5)"
                   + (f"; failing: {', '.join(lines)}" if lines else ""))
    assert ok


if __name__ == "__main__":
    failed = 0
    for key, fn in sorted(globals().items()):
        if key.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    sys.exit(1 if failed else 0)
