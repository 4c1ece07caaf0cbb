"""Loading and validating JSON instance files (format in docs/instance_format.md)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Optional

import jsonschema
import numpy as np

from . import problems
from .costs import COST_KINDS, GroundCostSpec
from .errors import ParseError, ScenredError
from .measures import DiscreteDistribution, empirical_from_samples, make_distribution, random_distribution

_num = {"type": "number"}
_int = {"type": "integer"}
_nonneg = {"type": "number", "minimum": 0}
_vec = {"type": "array", "items": _num, "minItems": 1}
_mat = {"type": "array", "items": _vec, "minItems": 1}
_bits = {"type": "array", "items": _vec}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


PROBLEM_PARAMS = {
    "newsvendor": _obj({"c": _nonneg, "h": _nonneg, "p": _nonneg, "grid": _vec}, ["grid"]),
    "fixed_recourse_lp": _obj({
        "q": _vec, "W": _mat, "h0": _vec, "H": _mat, "T0": _mat,
        "Tk": {"type": "array", "items": _mat},
        "candidates": _mat, "g": _vec,
        "integer_vars": {"type": "array", "items": {"type": "integer", "minimum": 0}},
        "box": {"type": "array", "items": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2}},
    }, ["q", "W", "h0", "H", "T0", "candidates"]),
    "cfl": _obj({"costs": _mat, "capacities": _vec, "candidates": _bits, "opening_costs": _vec},
                ["costs", "capacities"]),
    "knapsack": _obj({"weights": {"type": "array", "items": {"type": "integer", "minimum": 1}, "minItems": 1},
                      "values": {"type": "array", "items": _nonneg, "minItems": 1}}, ["weights", "values"]),
    "unit_commitment": _obj({
        "gen_costs": _vec, "pmin": _vec, "pmax": _vec, "ramp_up": _vec, "ramp_down": _vec,
        "shed_penalty": _nonneg, "periods": {"type": "integer", "minimum": 1},
        "commit_costs": _vec, "candidates": _bits,
    }, ["gen_costs", "pmin", "pmax", "ramp_up", "ramp_down", "shed_penalty", "periods"]),
    "network_design": _obj({
        "n_nodes": {"type": "integer", "minimum": 2},
        "arcs": {"type": "array", "items": {"type": "array", "items": _int, "minItems": 2, "maxItems": 2}},
        "arc_costs": _vec, "capacities": _vec,
        "designable": {"type": "array", "items": {"type": "boolean"}},
        "demand_base": _vec, "demand_matrix": _mat, "open_costs": _vec, "candidates": _bits,
    }, ["n_nodes", "arcs", "arc_costs", "capacities", "designable", "demand_base", "demand_matrix"]),
}

DISTRIBUTION = {
    "oneOf": [
        _obj({"atoms": _mat, "weights": _vec}, ["atoms", "weights"]),
        _obj({"samples": _mat}, ["samples"]),
        _obj({"random": _obj({
            "seed": _int, "n": {"type": "integer", "minimum": 1}, "candidates": _mat,
            "concentration": {"type": "number", "exclusiveMinimum": 0},
        }, ["seed", "n", "candidates"])}, ["random"]),
    ]
}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "additionalProperties": False,
    "required": ["problem", "distribution"],
    "properties": {
        "name": {"type": "string"},
        "problem": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind", "params"],
            "properties": {"kind": {"enum": sorted(PROBLEM_PARAMS)}, "params": {"type": "object"}},
            "allOf": [
                {"if": {"properties": {"kind": {"const": k}}}, "then": {"properties": {"params": s}}}
                for k, s in PROBLEM_PARAMS.items()
            ],
        },
        "distribution": DISTRIBUTION,
        "nu": DISTRIBUTION,
        "cost": _obj({
            "kind": {"enum": list(COST_KINDS)},
            "params": _obj({
                "alpha": {"type": "number", "exclusiveMinimum": 0}, "beta": _nonneg, "gamma": _nonneg,
                "panel": _mat, "M_pi": _nonneg, "R": _nonneg, "gamma_hat": _nonneg,
                "pi_bar": {"type": "array", "items": _nonneg},
            }),
            "grid": _mat,
        }, ["kind"]),
        "run": _obj({
            "m": {"type": "integer", "minimum": 1},
            "method": {"enum": ["exhaustive", "greedy", "swap"]},
            "tol": {"type": "number", "exclusiveMinimum": 0},
            "seed": _int,
        }),
    },
}


@dataclass(frozen=True, eq=False)
class LoadedInstance:
    name: str
    instance: problems.TwoStageInstance
    P: DiscreteDistribution
    nu: Optional[DiscreteDistribution]
    cost: Optional[GroundCostSpec]
    grid: Optional[list]
    run: dict
    raw: dict


def _line_of(text: str, path) -> Optional[int]:
    """Best-effort line of the last key on a JSON path."""
    keys = [p for p in path if isinstance(p, str)]
    if not keys:
        return None
    needle = json.dumps(keys[-1])
    for no, line in enumerate(text.splitlines(), 1):
        if needle + ":" in line.replace(" :", ":") or needle + " :" in line:
            return no
    return None


def parse_instance_text(text: str, source: str = "<string>") -> LoadedInstance:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{source}: invalid JSON: {exc.msg}", line=exc.lineno) from None
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(raw), key=lambda e: (len(e.absolute_path), list(map(str, e.absolute_path))))
    if errors:
        err = jsonschema.exceptions.best_match(errors)
        path = list(err.absolute_path)
        field = "/".join(str(p) for p in path) or "<root>"
        raise ParseError(f"{source}: {err.message}", line=_line_of(text, path), field=field)
    try:
        return _build(raw)
    except ParseError:
        raise
    except (ScenredError, ValueError, TypeError, IndexError) as exc:
        raise ParseError(f"{source}: {exc}") from None


def load_instance_file(path) -> LoadedInstance:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None
    return parse_instance_text(text, str(path))


def bundled_instance_names() -> list[str]:
    root = resources.files("scenred") / "data"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_bundled(name: str) -> LoadedInstance:
    res = resources.files("scenred") / "data" / f"{name}.json"
    return parse_instance_text(res.read_text(encoding="utf-8"), f"bundled:{name}")


def _distribution(block: dict, field: str) -> DiscreteDistribution:
    try:
        if "atoms" in block:
            return make_distribution(block["atoms"], block["weights"])
        if "samples" in block:
            return empirical_from_samples(block["samples"])
        r = block["random"]
        rng = np.random.default_rng(r["seed"])
        return random_distribution(rng, r["candidates"], r["n"], r.get("concentration", 1.0))
    except (ScenredError, ValueError) as exc:
        raise ParseError(str(exc), field=field) from None


def _linear(coeffs):
    if coeffs is None:
        return None
    g = np.asarray(coeffs, dtype=float)
    return lambda x: float(g @ np.asarray(x))


def _problem(kind: str, p: dict) -> problems.TwoStageInstance:
    if kind == "newsvendor":
        return problems.build_newsvendor(p.get("c", 0.0), p.get("h", 1.0), p.get("p", 1.0), p["grid"])
    if kind == "fixed_recourse_lp":
        maps = problems.make_affine_maps(p["h0"], p["H"], p["T0"], p.get("Tk"))
        return problems.build_fixed_recourse_lp(
            p["q"], p["W"], maps, [tuple(x) for x in p["candidates"]], _linear(p.get("g")),
            p.get("integer_vars", ()), [tuple(b) for b in p.get("box", ())],
            name="milp-recourse" if p.get("integer_vars") else "fixed-recourse-lp",
        )
    if kind == "cfl":
        return problems.build_cfl_single_source(p["costs"], p["capacities"], p.get("candidates"),
                                                p.get("opening_costs"))
    if kind == "knapsack":
        return problems.build_unbounded_knapsack(p["weights"], p["values"])
    if kind == "unit_commitment":
        return problems.build_unit_commitment_toy(
            p["gen_costs"], p["pmin"], p["pmax"], p["ramp_up"], p["ramp_down"], p["shed_penalty"],
            p["periods"], p.get("commit_costs"), p.get("candidates"))
    return problems.build_network_design_toy(
        p["n_nodes"], [tuple(a) for a in p["arcs"]], p["arc_costs"], p["capacities"], p["designable"],
        p["demand_base"], p["demand_matrix"], p.get("open_costs"), p.get("candidates"))


def _build(raw: dict) -> LoadedInstance:
    try:
        inst = _problem(raw["problem"]["kind"], raw["problem"]["params"])
    except (ScenredError, ValueError, TypeError, IndexError) as exc:
        raise ParseError(str(exc), field="problem/params") from None
    P = _distribution(raw["distribution"], "distribution")
    nu = _distribution(raw["nu"], "nu") if "nu" in raw else None
    for label, d in (("distribution", P), ("nu", nu)):
        if d is not None and d.dim != inst.dim:
            raise ParseError(f"atoms have dim {d.dim}, problem expects {inst.dim}", field=label)
    cost = grid = None
    if "cost" in raw:
        cost = GroundCostSpec(raw["cost"]["kind"], dict(raw["cost"].get("params", {})))
        grid = [tuple(g) for g in raw["cost"]["grid"]] if "grid" in raw["cost"] else None
    return LoadedInstance(raw.get("name", raw["problem"]["kind"]), inst, P, nu, cost, grid,
                          dict(raw.get("run", {})), raw)
