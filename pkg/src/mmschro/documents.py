"""Problem and solution documents: strict JSON schemas and deterministic output.

Problem documents carry version "1", one weight vector per space, exactly one
of an explicit kernel or a Gibbs cost record (both flat row-major), and one
density vector per space.  Unknown fields anywhere are rejected.  Solution
documents are emitted with a fixed key order and shortest round-trip float
encoding, so identical inputs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .entropy import coupling_from_potentials, duality_gap, relative_entropy
from .errors import IoError, ParseError, SchemaError
from .problem import (
    DiscreteSpace,
    GibbsSpec,
    KernelTensor,
    ValidatedProblem,
    build_gibbs_kernel,
    validate_problem,
)
from .schroedinger import Gauge, PotentialFamily, dual_objective, marginal_residual
from .solvers import SolveReport

_TOP_KEYS = {"version", "spaces", "kernel", "gibbs", "marginals"}
_KERNEL_KEYS = {"shape", "order", "data"}
_GIBBS_KEYS = {"shape", "order", "cost_data", "epsilon"}


def _require_keys(obj: dict, allowed: set, required: set, what: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"{what} has unknown fields: {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise SchemaError(f"{what} is missing fields: {sorted(missing)}")


def _number(value, what: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"{what} must be a number, got {value!r}")
    return float(value)


def _number_list(values, what: str) -> list:
    if not isinstance(values, list) or not values:
        raise SchemaError(f"{what} must be a nonempty array of numbers")
    return [_number(v, what) for v in values]


def _int_list(values, what: str) -> list:
    if not isinstance(values, list) or not values:
        raise SchemaError(f"{what} must be a nonempty array of integers")
    out = []
    for v in values:
        if isinstance(v, bool) or not isinstance(v, int):
            raise SchemaError(f"{what} must contain integers, got {v!r}")
        out.append(v)
    return out


@dataclass(frozen=True)
class ProblemDocument:
    """Parsed and fully validated problem file."""

    version: str
    weights: tuple
    kernel: KernelTensor | None
    gibbs: GibbsSpec | None
    marginals: tuple
    problem: ValidatedProblem


def parse_problem(text: str) -> ProblemDocument:
    """Parse a problem document; schema violations raise SchemaError and
    malformed JSON raises ParseError.  The result already passed validation."""
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise SchemaError("top level must be an object")
    _require_keys(obj, _TOP_KEYS, {"version", "spaces", "marginals"}, "document")
    if obj["version"] != "1":
        raise SchemaError(f"unsupported version {obj['version']!r}")
    if ("kernel" in obj) == ("gibbs" in obj):
        raise SchemaError("exactly one of 'kernel' or 'gibbs' is required")

    if not isinstance(obj["spaces"], list) or not obj["spaces"]:
        raise SchemaError("'spaces' must be a nonempty array")
    weights = [_number_list(w, "space weights") for w in obj["spaces"]]
    if not isinstance(obj["marginals"], list) or not obj["marginals"]:
        raise SchemaError("'marginals' must be a nonempty array")
    marginals = [_number_list(d, "marginal density") for d in obj["marginals"]]

    kernel = None
    gibbs = None
    if "kernel" in obj:
        rec = obj["kernel"]
        if not isinstance(rec, dict):
            raise SchemaError("'kernel' must be an object")
        _require_keys(rec, _KERNEL_KEYS, _KERNEL_KEYS, "kernel record")
        if rec["order"] != "row-major":
            raise SchemaError(f"kernel order must be 'row-major', got {rec['order']!r}")
        shape = _int_list(rec["shape"], "kernel shape")
        data = _number_list(rec["data"], "kernel data")
        kernel = KernelTensor.from_values(data, shape=shape)
    else:
        rec = obj["gibbs"]
        if not isinstance(rec, dict):
            raise SchemaError("'gibbs' must be an object")
        _require_keys(rec, _GIBBS_KEYS, _GIBBS_KEYS, "gibbs record")
        if rec["order"] != "row-major":
            raise SchemaError(f"gibbs order must be 'row-major', got {rec['order']!r}")
        shape = _int_list(rec["shape"], "gibbs shape")
        cost = np.array(_number_list(rec["cost_data"], "gibbs cost data"))
        try:
            cost = cost.reshape(tuple(shape))
        except ValueError as exc:
            raise SchemaError(f"gibbs cost data does not fill shape {shape}") from exc
        gibbs = GibbsSpec(cost=cost, epsilon=_number(rec["epsilon"], "epsilon"))
        kernel = build_gibbs_kernel(gibbs)

    spaces = tuple(DiscreteSpace(w) for w in weights)
    problem = validate_problem(spaces, kernel, marginals)
    return ProblemDocument(
        version="1",
        weights=tuple(tuple(w) for w in weights),
        kernel=None if gibbs is not None else kernel,
        gibbs=gibbs,
        marginals=tuple(tuple(d) for d in marginals),
        problem=problem,
    )


def load_problem(path) -> ProblemDocument:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    return parse_problem(text)


def problem_to_dict(document: ProblemDocument, materialize: bool = False) -> dict:
    """Document back as a JSON-ready dict; ``materialize`` converts a Gibbs
    record into an explicit kernel record."""
    out = {
        "version": "1",
        "spaces": [list(w) for w in document.weights],
    }
    if document.gibbs is not None and not materialize:
        out["gibbs"] = {
            "shape": list(document.gibbs.cost.shape),
            "order": "row-major",
            "cost_data": [float(c) for c in document.gibbs.cost.ravel()],
            "epsilon": document.gibbs.epsilon,
        }
    else:
        kernel = document.problem.kernel
        out["kernel"] = {
            "shape": list(kernel.shape),
            "order": "row-major",
            "data": [float(v) for v in kernel.values.ravel()],
        }
    out["marginals"] = [list(d) for d in document.marginals]
    return out


def _write_text(text: str, path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def write_problem(document: ProblemDocument, path, materialize: bool = False) -> None:
    _write_text(json.dumps(problem_to_dict(document, materialize), indent=2) + "\n", path)


@dataclass(frozen=True)
class SolutionDocument:
    """Solution payload: mean-zero potentials plus certificates and the report."""

    potentials: tuple
    gauge: str
    residual_linf: float
    dual_value: float
    entropy_value: float
    duality_gap: float
    report: dict

    def to_dict(self) -> dict:
        return {
            "version": "1",
            "gauge": self.gauge,
            "potentials": [list(v) for v in self.potentials],
            "residual_linf": self.residual_linf,
            "dual_value": self.dual_value,
            "entropy_value": self.entropy_value,
            "duality_gap": self.duality_gap,
            "report": self.report,
        }


def build_solution_document(problem: ValidatedProblem, family: PotentialFamily,
                            report: SolveReport, mu=None) -> SolutionDocument:
    targets = problem.target if mu is None else mu
    res = marginal_residual(problem, family, targets)
    dual = dual_objective(problem, family, targets)
    coupling = coupling_from_potentials(problem, family)
    entropy = relative_entropy(coupling, problem.kernel, problem.spaces)
    return SolutionDocument(
        potentials=tuple(tuple(float(x) for x in v) for v in family.values),
        gauge=family.gauge.value,
        residual_linf=res.norm_linf,
        dual_value=dual,
        entropy_value=entropy,
        duality_gap=entropy - dual,
        report=report.to_dict(),
    )


def solution_to_json(solution: SolutionDocument) -> str:
    return json.dumps(solution.to_dict(), indent=2) + "\n"


def write_solution(solution: SolutionDocument, path) -> None:
    _write_text(solution_to_json(solution), path)


def read_solution(path) -> SolutionDocument:
    """Read a solution document back; used for round-trips and inspection."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            obj = json.load(handle)
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    if not isinstance(obj, dict) or obj.get("version") != "1":
        raise SchemaError("not a version-1 solution document")
    try:
        return SolutionDocument(
            potentials=tuple(tuple(float(x) for x in v) for v in obj["potentials"]),
            gauge=obj["gauge"],
            residual_linf=float(obj["residual_linf"]),
            dual_value=float(obj["dual_value"]),
            entropy_value=float(obj["entropy_value"]),
            duality_gap=float(obj["duality_gap"]),
            report=obj["report"],
        )
    except KeyError as exc:
        raise SchemaError(f"solution document missing field {exc}") from exc


def stability_report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2) + "\n"


def write_stability_report(report, path) -> None:
    _write_text(stability_report_json(report), path)
