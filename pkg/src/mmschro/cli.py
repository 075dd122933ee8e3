"""Command line interface.

Subcommands: ``solve`` (write a solution document), ``check-jacobian``
(print a pass/fail table of derivative diagnostics), ``stability`` (run the
band experiment), ``gibbs`` (materialize a Gibbs cost record into an
explicit kernel document).  Exit codes: 0 success or all checks passed,
1 validation or input error, 2 iteration budget exhausted, 3 a diagnostic
check failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import __version__
from .documents import (
    build_solution_document,
    load_problem,
    parse_problem,
    problem_to_dict,
    solution_to_json,
    stability_report_json,
    write_problem,
    write_solution,
    write_stability_report,
)
from .errors import NotConverged, SchroedingerError
from .jacobian import (
    analytic_kernel_angle,
    apply_jacobian,
    apply_log_jacobian,
    assemble_dense,
    build_jacobian,
    nullspace_spectrum,
    range_defect,
    solve_restricted,
    stack_family,
)
from .problem import family_norm
from .schroedinger import forward_map, project_mean_zero, zero_potentials
from .solvers import SolverConfig, solve
from .stability import lipschitz_experiment

_EXIT_OK = 0
_EXIT_INVALID = 1
_EXIT_NOT_CONVERGED = 2
_EXIT_CHECK_FAILED = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmschro",
        description="Multi-marginal Schroedinger system solver and diagnostics.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="solve a problem document")
    p_solve.add_argument("problem", help="path to a problem JSON document")
    p_solve.add_argument("--method", choices=("sinkhorn", "newton", "hybrid"),
                         default="hybrid")
    p_solve.add_argument("--tol", type=float, default=1e-10)
    p_solve.add_argument("--max-iter", type=int, default=10_000)
    p_solve.add_argument("--out", help="write the solution document here")
    p_solve.add_argument("--figures", metavar="DIR",
                         help="render convergence figures and a history CSV into DIR")

    p_check = sub.add_parser("check-jacobian", help="derivative diagnostics")
    p_check.add_argument("problem", help="path to a problem JSON document")
    p_check.add_argument("--at", choices=("solution", "zero"), default="solution")
    p_check.add_argument("--seed", type=int, default=0)

    p_stab = sub.add_parser("stability", help="band stability experiment")
    p_stab.add_argument("problem", help="problem document used as the template")
    p_stab.add_argument("--band", type=float, required=True)
    p_stab.add_argument("--trials", type=int, required=True)
    p_stab.add_argument("--seed", type=int, required=True)
    p_stab.add_argument("--mass", type=float, default=1.0)
    p_stab.add_argument("--tol", type=float, default=1e-10)
    p_stab.add_argument("--out", help="write the report JSON here")
    p_stab.add_argument("--csv", help="write the per-pair CSV here")
    p_stab.add_argument("--figures", metavar="DIR",
                        help="render stability figures and the pair CSV into DIR")

    p_gibbs = sub.add_parser("gibbs", help="materialize a Gibbs kernel document")
    p_gibbs.add_argument("cost_file", help="problem document with a gibbs record")
    p_gibbs.add_argument("--epsilon", type=float, default=None,
                         help="override the temperature in the file")
    p_gibbs.add_argument("--out", help="write the kernel document here")
    return parser


def _cmd_solve(args) -> int:
    document = load_problem(args.problem)
    problem = document.problem
    config = SolverConfig(tolerance=args.tol, max_iterations=args.max_iter,
                          method=args.method)
    exit_code = _EXIT_OK
    try:
        family, report = solve(problem, config=config)
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        family, report = exc.potentials, exc.report
        exit_code = _EXIT_NOT_CONVERGED
    solution = build_solution_document(problem, family, report)
    if args.out:
        write_solution(solution, args.out)
    else:
        sys.stdout.write(solution_to_json(solution))
    if args.figures:
        from .figures import render_solve_figures

        for path in render_solve_figures(solution.report, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return exit_code


def _check_rows(problem, family, seed: int) -> list:
    """Compute the diagnostic table rows: (name, value, threshold, passed)."""
    rng = np.random.default_rng(seed)
    jac = build_jacobian(problem, family)
    rows = []

    spectrum = nullspace_spectrum(jac)
    expected = problem.num_marginals - 1
    rows.append((
        "kernel dimension",
        float(spectrum.kernel_dimension),
        f"== {expected}",
        spectrum.kernel_dimension == expected,
    ))
    angle = analytic_kernel_angle(problem, spectrum.kernel_basis)
    rows.append(("kernel subspace angle", angle, "<= 1e-8", angle <= 1e-8))
    smallest = spectrum.smallest_nonzero
    floor = 1e-6 * float(spectrum.singular_values[0])
    rows.append((
        "smallest nonzero singular value",
        smallest,
        f"> {floor:.3e}",
        smallest > floor,
    ))

    directions = [
        [rng.standard_normal(n) for n in problem.shape] for _ in range(5)
    ]
    worst_range = max(
        range_defect(jac, apply_log_jacobian(jac, h)) for h in directions
    )
    rows.append(("range defect of log-derivative images", worst_range, "<= 1e-12",
                 worst_range <= 1e-12))

    step = 1e-5
    worst_fd = 0.0
    base = forward_map(problem, family)
    for h in directions:
        plus = forward_map(problem, [v + step * d for v, d in zip(family.values, h)])
        minus = forward_map(problem, [v - step * d for v, d in zip(family.values, h)])
        fd = [(p - m) / (2 * step) for p, m in zip(plus, minus)]
        exact = apply_jacobian(jac, h)
        scale = max(family_norm(problem.spaces, exact, math.inf), 1e-12)
        err = family_norm(
            problem.spaces, [f - e for f, e in zip(fd, exact)], math.inf
        ) / scale
        worst_fd = max(worst_fd, err)
    rows.append(("finite-difference match", worst_fd, "<= 1e-6", worst_fd <= 1e-6))
    del base

    matrix = assemble_dense(jac)
    worst_consistency = 0.0
    for h in directions:
        via_matrix = matrix @ stack_family(h)
        via_apply = stack_family(apply_log_jacobian(jac, h))
        worst_consistency = max(
            worst_consistency, float(np.max(np.abs(via_matrix - via_apply)))
        )
    rows.append(("dense/apply consistency", worst_consistency, "<= 1e-13",
                 worst_consistency <= 1e-13))

    h0 = project_mean_zero(problem.spaces, directions[0])
    theta = apply_jacobian(jac, h0)
    recovered = solve_restricted(jac, theta)
    round_trip = family_norm(
        problem.spaces,
        [a - b for a, b in zip(recovered.values, h0.values)],
        math.inf,
    )
    rows.append(("restricted solve round-trip", round_trip, "<= 1e-10",
                 round_trip <= 1e-10))
    return rows


def _cmd_check_jacobian(args) -> int:
    document = load_problem(args.problem)
    problem = document.problem
    if args.at == "solution":
        config = SolverConfig(tolerance=1e-10, max_iterations=100_000, method="hybrid")
        family, _ = solve(problem, config=config)
    else:
        family = zero_potentials(problem)
    rows = _check_rows(problem, family, args.seed)
    expected = problem.num_marginals - 1
    spectrum_dim = int(rows[0][1])
    print(f"kernel dim = {spectrum_dim} (expected {expected})")
    width = max(len(r[0]) for r in rows)
    all_ok = True
    for name, value, threshold, ok in rows:
        status = "PASS" if ok else "FAIL"
        print(f"{name:<{width}}  {value:>12.4e}  {threshold:>12}  {status}")
        all_ok = all_ok and ok
    return _EXIT_OK if all_ok else _EXIT_CHECK_FAILED


def _cmd_stability(args) -> int:
    document = load_problem(args.problem)
    problem = document.problem
    report = lipschitz_experiment(
        problem,
        band=args.band,
        trials=args.trials,
        seed=args.seed,
        mass=args.mass,
        tolerance=args.tol,
    )
    if args.out:
        write_stability_report(report, args.out)
    else:
        sys.stdout.write(stability_report_json(report))
    if args.csv:
        from .figures import write_pairs_csv

        write_pairs_csv(report, args.csv)
    if args.figures:
        from .figures import render_stability_figures

        for path in render_stability_figures(report, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    return _EXIT_OK


def _cmd_gibbs(args) -> int:
    document = load_problem(args.cost_file)
    if document.gibbs is None:
        print("input document has no gibbs record", file=sys.stderr)
        return _EXIT_INVALID
    if args.epsilon is not None:
        raw = problem_to_dict(document)
        raw["gibbs"]["epsilon"] = args.epsilon
        document = parse_problem(json.dumps(raw))
    if args.out:
        write_problem(document, args.out, materialize=True)
    else:
        sys.stdout.write(json.dumps(problem_to_dict(document, materialize=True),
                                    indent=2) + "\n")
    return _EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "solve": _cmd_solve,
        "check-jacobian": _cmd_check_jacobian,
        "stability": _cmd_stability,
        "gibbs": _cmd_gibbs,
    }
    try:
        return handlers[args.command](args)
    except NotConverged as exc:
        print(f"not converged: {exc}", file=sys.stderr)
        return _EXIT_NOT_CONVERGED
    except SchroedingerError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
