"""Stability experiments: band sampling, Lipschitz quotients, sensitivity norms.

The solution map sends a balanced family of marginals inside the band
[1/M, M] to the mean-zero potentials solving the system.  These experiments
measure its empirical Lipschitz behavior and compare each quotient against
the largest sensitivity norm along the sampled segment, which a mean-value
bound says must dominate it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    AllTrialsFailed,
    BandInfeasible,
    LineSearchFailed,
    NotConverged,
)
from .jacobian import (
    JacobianOperator,
    assemble_dense,
    build_jacobian,
    _gauge_rows,
    _sqrt_weight_vector,
)
from .problem import MarginalFamily, ValidatedProblem, family_norm
from .schroedinger import family_values, marginal_values
from .solvers import SolverConfig, hybrid_solve

# Slack on band membership so degenerate bands survive weight rounding.
_BAND_EDGE_TOL = 1e-12
_RESAMPLE_BUDGET = 10_000
# Pairs closer than this in sup norm have no meaningful quotient.
_SKIP_DISTANCE = 1e-12


@dataclass
class PairRecord:
    """Everything measured for one sampled pair of marginal families."""

    index: int
    distance_l2: float = math.nan
    distance_linf: float = math.nan
    quotient_l2: float | None = None
    quotient_linf: float | None = None
    segment_norm_max: float | None = None
    sup_mu: float | None = None
    sup_nu: float | None = None
    skipped: bool = False
    failed: bool = False

    def to_dict(self) -> dict:
        return {
            "index": self.index,
            "distance_l2": self.distance_l2,
            "distance_linf": self.distance_linf,
            "quotient_l2": self.quotient_l2,
            "quotient_linf": self.quotient_linf,
            "segment_norm_max": self.segment_norm_max,
            "sup_mu": self.sup_mu,
            "sup_nu": self.sup_nu,
            "skipped": self.skipped,
            "failed": self.failed,
        }


@dataclass
class StabilityReport:
    band: float
    trials: int
    seed: int
    mass: float
    failures: int = 0
    skipped: int = 0
    max_potential_sup: float | None = None
    max_ratio_l2: float | None = None
    max_ratio_linf: float | None = None
    max_op_norm_l2: float | None = None
    pairs: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "band": self.band,
            "trials": self.trials,
            "seed": self.seed,
            "mass": self.mass,
            "failures": self.failures,
            "skipped": self.skipped,
            "max_potential_sup": self.max_potential_sup,
            "max_ratio_l2": self.max_ratio_l2,
            "max_ratio_linf": self.max_ratio_linf,
            "max_op_norm_l2": self.max_op_norm_l2,
            "pairs": [p.to_dict() for p in self.pairs],
        }


def sample_marginals_in_band(spaces, band: float, mass: float, seed: int) -> MarginalFamily:
    """Draw one balanced family with every entry in [1/band, band].

    Each component is drawn from the widest symmetric window around ``mass``
    inside the band, then shifted by a constant so its weighted total equals
    ``mass`` exactly; draws whose correction leaves the band are rejected
    and resampled.
    """
    band = float(band)
    if band < 1.0 or not math.isfinite(band):
        raise BandInfeasible(f"band bound must be >= 1, got {band!r}")
    lo, hi = 1.0 / band, band
    mass = float(mass)
    if not (lo <= mass <= hi):
        raise BandInfeasible(f"mass {mass!r} lies outside [{lo!r}, {hi!r}]")
    a = max(lo, 2.0 * mass - hi)
    b = min(hi, 2.0 * mass - lo)
    rng = np.random.default_rng(seed)
    slack = _BAND_EDGE_TOL * max(1.0, hi)
    densities = []
    for sp in spaces:
        for _ in range(_RESAMPLE_BUDGET):
            draw = rng.uniform(a, b, sp.n)
            draw = draw + (mass - float(np.dot(sp.weights, draw)))
            if draw.min() >= lo - slack and draw.max() <= hi + slack:
                densities.append(draw)
                break
        else:
            raise BandInfeasible(
                f"could not place {sp.n} atoms in [{lo:g}, {hi:g}] at mass {mass:g} "
                f"after {_RESAMPLE_BUDGET} draws"
            )
    return MarginalFamily.balanced(spaces, densities)


def trial_seeds(seed: int, count: int) -> list:
    """Deterministic per-trial seeds; a longer run extends a shorter one."""
    state = np.random.SeedSequence(seed).generate_state(count, dtype=np.uint32)
    return [int(s) for s in state]


def _default_config(tolerance: float) -> SolverConfig:
    return SolverConfig(tolerance=tolerance, max_iterations=100_000, method="hybrid")


def restricted_inverse_norm(jac: JacobianOperator) -> float:
    """Operator norm, in the weighted geometry, of the inverse of the
    forward-map derivative restricted to the mean-zero gauge."""
    problem = jac.problem
    matrix = assemble_dense(jac)
    forward = np.exp(np.concatenate(jac.log_forward))
    matrix = forward[:, None] * matrix
    root = _sqrt_weight_vector(problem)
    sym = matrix * root[:, None] / root[None, :]
    gauge = _gauge_rows(problem) / root[None, :]
    basis = scipy.linalg.null_space(gauge)
    sv = np.linalg.svd(sym @ basis, compute_uv=False)
    return 1.0 / float(sv[-1])


def solution_sensitivity_norm(problem: ValidatedProblem, mu=None,
                              tolerance: float = 1e-10,
                              config: SolverConfig | None = None) -> float:
    """Sensitivity of the solution map at ``mu``: solve, build the
    derivative there, and return the restricted inverse norm."""
    config = config or _default_config(tolerance)
    family, _ = hybrid_solve(problem, mu, config)
    return restricted_inverse_norm(build_jacobian(problem, family))


def _sup(values) -> float:
    return max(float(np.max(np.abs(v))) for v in values)


def lipschitz_experiment(problem: ValidatedProblem, band: float, trials: int,
                         seed: int, mass: float = 1.0,
                         tolerance: float = 1e-10,
                         segment_points: int = 11,
                         config: SolverConfig | None = None) -> StabilityReport:
    """Sample pairs in the band, solve both, and compare each Lipschitz
    quotient against the max sensitivity norm over the sampled segment."""
    config = config or _default_config(tolerance)
    report = StabilityReport(
        band=float(band), trials=int(trials), seed=int(seed), mass=float(mass)
    )
    seeds = trial_seeds(seed, 2 * trials)
    successes = 0
    for t in range(trials):
        record = PairRecord(index=t)
        report.pairs.append(record)
        try:
            mu = sample_marginals_in_band(problem.spaces, band, mass, seeds[2 * t])
            nu = sample_marginals_in_band(problem.spaces, band, mass, seeds[2 * t + 1])
            phi_mu, _ = hybrid_solve(problem, mu, config)
            phi_nu, _ = hybrid_solve(problem, nu, config)
        except (NotConverged, LineSearchFailed):
            record.failed = True
            report.failures += 1
            continue
        successes += 1
        record.sup_mu = _sup(phi_mu.values)
        record.sup_nu = _sup(phi_nu.values)
        diff_mu = [a - b for a, b in zip(mu.densities, nu.densities)]
        record.distance_l2 = family_norm(problem.spaces, diff_mu, 2)
        record.distance_linf = family_norm(problem.spaces, diff_mu, math.inf)
        if record.distance_linf < _SKIP_DISTANCE:
            record.skipped = True
            report.skipped += 1
            continue
        diff_phi = [a - b for a, b in zip(phi_mu.values, phi_nu.values)]
        record.quotient_l2 = family_norm(problem.spaces, diff_phi, 2) / record.distance_l2
        record.quotient_linf = (
            family_norm(problem.spaces, diff_phi, math.inf) / record.distance_linf
        )
        seg_max = 0.0
        try:
            for tau in np.linspace(0.0, 1.0, segment_points):
                point = [
                    (1.0 - tau) * m + tau * n for m, n in zip(mu.densities, nu.densities)
                ]
                phi_point, _ = hybrid_solve(problem, point, config)
                seg_max = max(
                    seg_max, restricted_inverse_norm(build_jacobian(problem, phi_point))
                )
        except (NotConverged, LineSearchFailed):
            record.failed = True
            report.failures += 1
            continue
        record.segment_norm_max = seg_max

    sups = [r.sup_mu for r in report.pairs if r.sup_mu is not None]
    sups += [r.sup_nu for r in report.pairs if r.sup_nu is not None]
    report.max_potential_sup = max(sups) if sups else None
    quots_l2 = [r.quotient_l2 for r in report.pairs if r.quotient_l2 is not None]
    quots_linf = [r.quotient_linf for r in report.pairs if r.quotient_linf is not None]
    norms = [r.segment_norm_max for r in report.pairs if r.segment_norm_max is not None]
    report.max_ratio_l2 = max(quots_l2) if quots_l2 else None
    report.max_ratio_linf = max(quots_linf) if quots_linf else None
    report.max_op_norm_l2 = max(norms) if norms else None
    if trials > 0 and successes == 0 and report.failures > 0:
        raise AllTrialsFailed(f"all {trials} trials failed to solve")
    return report


def potential_sup_over(problem: ValidatedProblem, marginals, tolerance: float = 1e-10,
                       config: SolverConfig | None = None) -> float:
    """Largest sup norm of the solution potentials over given marginal families."""
    config = config or _default_config(tolerance)
    worst = 0.0
    for mu in marginals:
        family, _ = hybrid_solve(problem, mu, config)
        worst = max(worst, _sup(family.values))
    return worst


def potential_bound_scan(problem: ValidatedProblem, band: float, trials: int,
                         seed: int, mass: float = 1.0,
                         tolerance: float = 1e-10,
                         config: SolverConfig | None = None) -> float:
    """Empirical a-priori bound: max solution sup norm over band samples.

    Per-trial seeds extend prefix-stably, so doubling ``trials`` with the
    same ``seed`` reuses the first half of the samples.
    """
    seeds = trial_seeds(seed, trials)
    samples = (
        sample_marginals_in_band(problem.spaces, band, mass, s) for s in seeds
    )
    return potential_sup_over(problem, samples, tolerance, config)
