"""Command-line entry point: ``scenred solve|regret|stability|reduce|paper-examples``.

Exit codes: 0 success, 1 a verification failed, 2 bad input.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Callable

import numpy as np

from .costs import bm_regret_term, build_cost, cost_knapsack
from .errors import ParseError, ScenredError
from .instance_file import LoadedInstance, bundled_instance_names, load_bundled, load_instance_file
from .measures import dirac, uniform, union_support
from .problems import build_newsvendor, expected_value, toy_knapsack
from .reduce import METHODS, reduction_stability_audit
from .regret import certify_domination, regret_matrix
from .stability import STABILITY_TOL, check_stability

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _num(v):
    """JSON-safe number: infinities become the strings 'inf' / '-inf'."""
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return _num(obj)


def _fmt(v) -> str:
    return f"{v:.10g}" if isinstance(v, (float, np.floating)) else str(v)


def _matrix_lines(M: np.ndarray, labels) -> list[str]:
    width = max(12, max(len(str(l)) for l in labels) + 2)
    out = [" " * width + "".join(f"{str(l):>{width}}" for l in labels)]
    for lab, row in zip(labels, M):
        out.append(f"{str(lab):>{width}}" + "".join(f"{_fmt(v):>{width}}" for v in row))
    return out


def _label(s) -> str:
    return "(" + ",".join(f"{c:g}" for c in s.coords) + ")"


def _require_cost(li: LoadedInstance):
    if li.cost is None:
        raise ParseError("this command needs a 'cost' block", field="cost")
    return li.cost


def cmd_solve(li: LoadedInstance, args):
    inst, P = li.instance, li.P
    v, x = expected_value(inst, P)
    lines = [f"instance: {li.name}", f"v(P) = {_fmt(v)}", f"minimizer x = {list(x)}", "",
             "atom, weight, Q(x, atom)"]
    rows = []
    for a, w in zip(P.atoms, P.weights):
        q = inst.Q(x, a)
        rows.append({"atom": list(a.coords), "weight": float(w), "Q": q})
        lines.append(f"{_label(a)}, {_fmt(float(w))}, {_fmt(q)}")
    return lines, {"command": "solve", "v": v, "minimizer": list(x), "table": rows}, True


def cmd_regret(li: LoadedInstance, args):
    spec = _require_cost(li)
    support = union_support(li.P, li.nu) if li.nu is not None else li.P.atoms
    R = regret_matrix(li.instance, support)
    C = build_cost(spec, li.instance, support, support, grid=li.grid)
    cert = certify_domination(R, C)
    labels = [_label(s) for s in support]
    lines = [f"instance: {li.name}", f"cost: {spec.kind}", "", "regret matrix R[i][j]:"]
    lines += _matrix_lines(R.entries, labels)
    lines += ["", f"beta_hat = {_fmt(cert.beta_hat)}  [{'estimate' if cert.estimated else 'exact'}]",
              f"argmax pair = {cert.argmax_pair}", f"violations = {list(cert.violations)}",
              f"conventions: {cert.convention_notes}"]
    data = {"command": "regret", "support": [list(s.coords) for s in support], "R": R.entries,
            "beta_hat": cert.beta_hat, "argmax_pair": cert.argmax_pair, "violations": cert.violations,
            "estimated": cert.estimated}
    return lines, data, cert.valid


def cmd_stability(li: LoadedInstance, args):
    spec = _require_cost(li)
    if li.nu is None:
        raise ParseError("stability needs a 'nu' distribution", field="nu")
    union = union_support(li.P, li.nu)
    C = build_cost(spec, li.instance, union, union, grid=li.grid)
    cert = certify_domination(regret_matrix(li.instance, union), C)
    lines = [f"instance: {li.name}", f"cost: {spec.kind}"]
    if cert.violations:
        lines.append(f"certificate FAILED: regret positive where cost is zero on pairs {list(cert.violations)}")
        return lines, {"command": "stability", "violations": cert.violations}, False
    rep = check_stability(li.instance, li.P, li.nu, C, cert, tol=args.tol)
    lines += [rep.render()]
    return lines, {"command": "stability", **rep.to_dict()}, rep.passed


def cmd_reduce(li: LoadedInstance, args):
    spec = _require_cost(li)
    m = args.m if args.m is not None else li.run.get("m")
    if m is None:
        raise ParseError("reduce needs --m or run.m", field="run/m")
    method = args.method or li.run.get("method", "exhaustive")
    if not 1 <= m <= len(li.P):
        raise ParseError(f"m must lie in 1..{len(li.P)}", field="run/m")
    audit = reduction_stability_audit(li.instance, li.P, m, spec, method, tol=args.tol, grid=li.grid)
    red = audit.reduction
    lines = [f"instance: {li.name}", f"cost: {spec.kind}", f"method: {red.method}, m = {red.m}",
             f"kept indices: {list(red.kept_indices)}",
             "kept atoms: " + ", ".join(f"{_label(a)}:{_fmt(float(w))}" for a, w in zip(red.reduced.atoms, red.reduced.weights)),
             "assignment: " + ", ".join(f"{i}->{j}" for i, j in sorted(red.assignment.items())),
             f"T_c(P, Q) = {_fmt(red.transport_cost)} (solver re-check {_fmt(audit.solver_cost)}, "
             f"{'verified' if audit.redistribution_verified else 'MISMATCH'})",
             f"beta_hat = {_fmt(audit.certificate.beta_hat)}, violations = {list(audit.certificate.violations)}",
             audit.stability.render(),
             f"realized |v(P) - v(Q)| = {_fmt(audit.realized_gap)} <= bound {_fmt(audit.bound)}: "
             f"{'pass' if audit.passed else 'FAIL'}"]
    if audit.direction_flag:
        lines.append(f"note: directed transport costs differ by a factor {_fmt(audit.direction_ratio)}")
    data = {"command": "reduce", "method": red.method, "m": red.m, "kept_indices": red.kept_indices,
            "kept_atoms": [list(a.coords) for a in red.reduced.atoms], "weights": red.reduced.weights,
            "assignment": red.assignment, "transport_cost": red.transport_cost,
            "solver_cost": audit.solver_cost, "beta_hat": audit.certificate.beta_hat,
            "violations": audit.certificate.violations, "stability": audit.stability.to_dict(),
            "realized_gap": audit.realized_gap, "bound": audit.bound,
            "direction_ratio": audit.direction_ratio, "passed": audit.passed}
    return lines, data, audit.passed


def worked_example_checks() -> list[tuple[str, float, float, float]]:
    """(name, computed, expected, tolerance) for the worked numeric examples."""
    kn = toy_knapsack()
    w, v = kn.params["weights"], kn.params["values"]
    R = regret_matrix(kn, [(14.0,), (13.0,)]).entries
    nv = build_newsvendor(0.0, 1.0, 1.0, [12, 18])
    checks = [
        ("knapsack Q(12)", kn.Q((0,), (12,)), 60.0, 0.0),
        ("knapsack Q(13)", kn.Q((0,), (13,)), 60.0, 0.0),
        ("knapsack Q(14)", kn.Q((0,), (14,)), 60.0, 0.0),
        ("knapsack regret R(14,13)", R[0, 1], 0.0, 0.0),
        ("knapsack stepwise bound (14,13)", cost_knapsack(w, v, [(14,)], [(13,)], "stepwise").entries[0, 0], 0.0, 0.0),
        ("knapsack linear bound (14,13)", cost_knapsack(w, v, [(14,)], [(13,)], "linear").entries[0, 0], 5.0, 0.0),
        ("newsvendor Q(12,10)", nv.Q((12,), (10,)), 2.0, 1e-12),
        ("newsvendor BM regret term (10,20)", bm_regret_term(nv, (10,), (20,), (12,), (18,)), 6.0, 1e-12),
        ("newsvendor v(uniform{10,20})", expected_value(nv, uniform([(10,), (20,)]))[0], 5.0, 1e-12),
    ]
    return checks


def cmd_worked_examples(args):
    lines, rows, ok = [], [], True
    for name, got, want, tol in worked_example_checks():
        good = abs(got - want) <= tol
        ok &= good
        lines.append(f"{'PASS' if good else 'FAIL'}  {name}: computed {_fmt(got)}, expected {_fmt(want)}")
        rows.append({"check": name, "computed": got, "expected": want, "passed": good})
    for name in bundled_instance_names():
        li = load_bundled(name)
        nu = li.nu if li.nu is not None else dirac(li.P.atoms[0])
        union = union_support(li.P, nu)
        C = build_cost(li.cost, li.instance, union, union, grid=li.grid)
        cert = certify_domination(regret_matrix(li.instance, union), C)
        good = cert.valid and check_stability(li.instance, li.P, nu, C, cert, tol=args.tol).passed
        ok &= good
        lines.append(f"{'PASS' if good else 'FAIL'}  bundled {name}: stability with {li.cost.kind} cost")
        rows.append({"check": f"bundled {name}", "passed": good})
    return lines, {"command": "paper-examples", "checks": rows}, ok


COMMANDS: dict[str, Callable] = {
    "solve": cmd_solve,
    "regret": cmd_regret,
    "stability": cmd_stability,
    "reduce": cmd_reduce,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="scenred", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=[*COMMANDS, "paper-examples"])
    ap.add_argument("--file", help="JSON instance file (required except for paper-examples)")
    ap.add_argument("--m", type=int, help="number of atoms to keep (reduce)")
    ap.add_argument("--method", choices=METHODS, help="reduction method (reduce)")
    ap.add_argument("--out", help="write the machine-readable report to this path")
    ap.add_argument("--tol", type=float, default=None, help=f"verification tolerance (default {STABILITY_TOL:g})")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "paper-examples":
            args.tol = STABILITY_TOL if args.tol is None else args.tol
            lines, data, ok = cmd_worked_examples(args)
        else:
            if not args.file:
                raise ParseError(f"{args.command} needs --file")
            li = load_instance_file(args.file)
            if args.tol is None:
                args.tol = li.run.get("tol", STABILITY_TOL)
            lines, data, ok = COMMANDS[args.command](li, args)
    except (ParseError, ScenredError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    print("\n".join(lines))
    print(f"verdict: {'pass' if ok else 'FAIL'}")
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(_jsonable({**data, "passed": ok}), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
