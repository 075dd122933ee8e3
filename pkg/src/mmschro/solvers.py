"""Sinkhorn, damped Newton, and hybrid solvers for the marginal-matching system.

Sinkhorn performs exact cyclic coordinate ascent on the concave dual, so its
recorded dual values are nondecreasing up to machine noise.  Newton solves
the linearized system restricted to the mean-zero gauge and backtracks on
the sup-norm residual.  The hybrid method runs Sinkhorn into the Newton
basin and then switches.

Nonconvergence raises NotConverged carrying the best iterate and the report,
so no work is discarded.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LineSearchFailed, NotConverged
from .jacobian import build_jacobian, solve_restricted
from .problem import ValidatedProblem
from .schroedinger import (
    Gauge,
    PotentialFamily,
    dual_objective,
    family_values,
    log_inner_integrals,
    marginal_residual,
    marginal_values,
    project_mean_zero,
)


@dataclass(frozen=True)
class SolverConfig:
    """Tuning knobs shared by all solve entry points.

    ``randomize_sweeps`` shuffles the Sinkhorn update order per sweep using
    ``seed``; it is off by default and never changes the fixed point.
    """

    tolerance: float = 1e-10
    max_iterations: int = 10_000
    method: str = "hybrid"
    backtrack_factor: float = 0.5
    sufficient_decrease: float = 1e-4
    max_backtracks: int = 20
    hybrid_switch: float = 1e-2
    seed: int = 0
    randomize_sweeps: bool = False

    def __post_init__(self):
        if not (self.tolerance > 0 and math.isfinite(self.tolerance)):
            raise ValueError("tolerance must be positive and finite")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not (0.0 < self.backtrack_factor < 1.0):
            raise ValueError("backtrack_factor must lie in (0, 1)")
        if not (0.0 < self.sufficient_decrease < 1.0):
            raise ValueError("sufficient_decrease must lie in (0, 1)")
        if self.max_backtracks < 1:
            raise ValueError("max_backtracks must be at least 1")
        if self.method not in ("sinkhorn", "newton", "hybrid"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.hybrid_switch <= 0:
            raise ValueError("hybrid_switch must be positive")


@dataclass
class SolveReport:
    """What happened during a solve. Histories keep accepted iterates only."""

    method_used: str
    iterations: int
    residual_history: list = field(default_factory=list)
    dual_history: list = field(default_factory=list)
    converged: bool = False
    step_sizes: list | None = None
    switch_index: int | None = None

    def to_dict(self) -> dict:
        return {
            "method_used": self.method_used,
            "iterations": self.iterations,
            "residual_history": [float(r) for r in self.residual_history],
            "dual_history": [float(d) for d in self.dual_history],
            "converged": bool(self.converged),
            "step_sizes": None
            if self.step_sizes is None
            else [float(t) for t in self.step_sizes],
            "switch_index": self.switch_index,
        }


def sinkhorn_step(problem: ValidatedProblem, phi, index: int, mu=None) -> PotentialFamily:
    """Exactly match marginal ``index``: replace that component by
    log target minus the log inner integral, leaving the others untouched."""
    targets = marginal_values(problem.target if mu is None else mu)
    vals = [np.array(v) for v in family_values(phi)]
    inner = _log_inner_single(problem, vals, index)
    vals[index] = np.log(targets[index]) - inner
    return PotentialFamily(values=tuple(vals), gauge=Gauge.FREE)


def _log_inner_single(problem, vals, index):
    # One component of log_inner_integrals; kept separate so a step costs one
    # contraction, not N.
    from scipy.special import logsumexp

    from .problem import axis_view

    ndim = problem.num_marginals
    work = problem.kernel.log_values
    for j in range(ndim):
        if j == index:
            continue
        term = vals[j] + problem.spaces[j].log_weights
        work = logsumexp(work + axis_view(term, j, ndim), axis=j, keepdims=True)
    return work.reshape(problem.shape[index])


def _initial_values(problem, init):
    if init is None:
        return [np.zeros(n) for n in problem.shape]
    return [np.array(v) for v in family_values(init)]


def sinkhorn_solve(problem: ValidatedProblem, mu=None, config: SolverConfig | None = None,
                   init=None) -> tuple:
    """Cyclic coordinate ascent from ``init`` (default zero), gauge-projected
    every sweep.  Returns (potentials, report); raises NotConverged with the
    best iterate attached when the sweep budget runs out."""
    config = config or SolverConfig(method="sinkhorn")
    targets = marginal_values(problem.target if mu is None else mu)
    log_targets = [np.log(t) for t in targets]
    vals = _initial_values(problem, init)
    vals = list(project_mean_zero(problem.spaces, vals).values)
    rng = np.random.default_rng(config.seed) if config.randomize_sweeps else None

    res = marginal_residual(problem, vals, targets)
    report = SolveReport(
        method_used="sinkhorn",
        iterations=0,
        residual_history=[res.norm_linf],
        dual_history=[dual_objective(problem, vals, targets)],
    )
    sweeps = 0
    while res.norm_linf > config.tolerance and sweeps < config.max_iterations:
        order = rng.permutation(problem.num_marginals) if rng is not None else range(
            problem.num_marginals
        )
        for i in order:
            vals[i] = log_targets[i] - _log_inner_single(problem, vals, i)
            report.dual_history.append(dual_objective(problem, vals, targets))
        vals = list(project_mean_zero(problem.spaces, vals).values)
        res = marginal_residual(problem, vals, targets)
        sweeps += 1
        report.residual_history.append(res.norm_linf)
    report.iterations = sweeps
    report.converged = res.norm_linf <= config.tolerance
    family = project_mean_zero(problem.spaces, vals)
    if not report.converged:
        raise NotConverged(
            f"sinkhorn stopped at residual {res.norm_linf:g} after {sweeps} sweeps",
            potentials=family,
            report=report,
        )
    return family, report


def _backtrack(evaluate, base_residual: float, config: SolverConfig):
    """Shrink the step until the sufficient-decrease test passes.

    ``evaluate`` maps a step size to (candidate_state, candidate_residual).
    Returns (state, residual, step).  Raises LineSearchFailed if no tried
    step decreases the residual enough.
    """
    t = 1.0
    tried = []
    for _ in range(config.max_backtracks + 1):
        cand, res = evaluate(t)
        if res <= (1.0 - config.sufficient_decrease * t) * base_residual:
            return cand, res, t
        tried.append((t, res))
        t *= config.backtrack_factor
    raise LineSearchFailed(
        f"no step down to {tried[-1][0]:g} decreased the residual {base_residual:g}",
        diagnostics={"base_residual": base_residual, "tried": tried},
    )


def newton_solve(problem: ValidatedProblem, mu=None, config: SolverConfig | None = None,
                 init=None) -> tuple:
    """Damped Newton on the gauge-restricted system.

    Each iteration solves the linearized equations for the current residual
    and backtracks on the sup-norm residual; iterates stay mean-zero."""
    config = config or SolverConfig(method="newton")
    targets = marginal_values(problem.target if mu is None else mu)
    vals = list(project_mean_zero(problem.spaces, _initial_values(problem, init)).values)

    res = marginal_residual(problem, vals, targets)
    report = SolveReport(
        method_used="newton",
        iterations=0,
        residual_history=[res.norm_linf],
        dual_history=[dual_objective(problem, vals, targets)],
        step_sizes=[],
    )
    iters = 0
    while res.norm_linf > config.tolerance and iters < config.max_iterations:
        jac = build_jacobian(problem, vals)
        direction = solve_restricted(jac, res.components)

        def trial(t, _vals=vals, _dir=direction.values):
            cand = [v - t * d for v, d in zip(_vals, _dir)]
            cand = list(project_mean_zero(problem.spaces, cand).values)
            cand_res = marginal_residual(problem, cand, targets)
            return (cand, cand_res), cand_res.norm_linf

        try:
            (vals, res), _, step = _backtrack(trial, res.norm_linf, config)
        except LineSearchFailed as exc:
            exc.diagnostics["iteration"] = iters
            raise
        iters += 1
        report.step_sizes.append(step)
        report.residual_history.append(res.norm_linf)
        report.dual_history.append(dual_objective(problem, vals, targets))
    report.iterations = iters
    report.converged = res.norm_linf <= config.tolerance
    family = project_mean_zero(problem.spaces, vals)
    if not report.converged:
        raise NotConverged(
            f"newton stopped at residual {res.norm_linf:g} after {iters} iterations",
            potentials=family,
            report=report,
        )
    return family, report


def hybrid_solve(problem: ValidatedProblem, mu=None, config: SolverConfig | None = None,
                 init=None) -> tuple:
    """Sinkhorn down to the switch residual, then Newton to tolerance."""
    config = config or SolverConfig(method="hybrid")
    coarse_tol = max(config.hybrid_switch, config.tolerance)
    coarse = SolverConfig(
        tolerance=coarse_tol,
        max_iterations=config.max_iterations,
        method="sinkhorn",
        backtrack_factor=config.backtrack_factor,
        sufficient_decrease=config.sufficient_decrease,
        max_backtracks=config.max_backtracks,
        hybrid_switch=config.hybrid_switch,
        seed=config.seed,
        randomize_sweeps=config.randomize_sweeps,
    )
    try:
        family, first = sinkhorn_solve(problem, mu, coarse, init)
    except NotConverged as exc:
        family, first = exc.potentials, exc.report

    report = SolveReport(
        method_used="hybrid",
        iterations=first.iterations,
        residual_history=list(first.residual_history),
        dual_history=list(first.dual_history),
        step_sizes=[],
        switch_index=len(first.residual_history),
    )
    if first.residual_history[-1] <= config.tolerance:
        report.converged = True
        return family, report

    fine = SolverConfig(
        tolerance=config.tolerance,
        max_iterations=config.max_iterations,
        method="newton",
        backtrack_factor=config.backtrack_factor,
        sufficient_decrease=config.sufficient_decrease,
        max_backtracks=config.max_backtracks,
        hybrid_switch=config.hybrid_switch,
        seed=config.seed,
        randomize_sweeps=config.randomize_sweeps,
    )
    try:
        family, second = newton_solve(problem, mu, fine, init=family)
    except NotConverged as exc:
        report.iterations += exc.report.iterations
        report.residual_history += exc.report.residual_history[1:]
        report.dual_history += exc.report.dual_history[1:]
        report.step_sizes += exc.report.step_sizes
        raise NotConverged(str(exc), potentials=exc.potentials, report=report) from None
    report.iterations += second.iterations
    report.residual_history += second.residual_history[1:]
    report.dual_history += second.dual_history[1:]
    report.step_sizes += second.step_sizes
    report.converged = True
    return family, report


_METHODS = {"sinkhorn": sinkhorn_solve, "newton": newton_solve, "hybrid": hybrid_solve}


def solve(problem: ValidatedProblem, mu=None, config: SolverConfig | None = None,
          init=None) -> tuple:
    """Dispatch on ``config.method``."""
    config = config or SolverConfig()
    return _METHODS[config.method](problem, mu, config, init)
