"""Forward maps of the discrete multi-marginal Schroedinger system.

A potential family ``phi`` assigns one vector per space.  The log forward
map sends it to

    log_forward_map(problem, phi)[i](x) =
        phi[i](x) + log sum_{y, y_i = x} K(y) exp(sum_{j != i} phi[j](y_j)) m_{-i}(y)

so that a solution of the system is exactly ``forward_map(phi) = mu``.  All
reductions run as successive single-axis max-shifted log-sum-exp
contractions, never materializing linear-domain intermediates.

Gauge handling: the system determines potentials only up to constant shifts
summing to zero.  ``project_mean_zero`` picks the representative whose first
N-1 components have zero weighted mean (the last component absorbs the
shifts); ``project_unit_exp`` normalizes so exp of the first N-1 components
integrates to one.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import GaugeViolation, LengthMismatch, NonFinite, Overflow, ShapeMismatch
from .problem import MarginalFamily, ValidatedProblem, axis_view, family_norm

# Tolerance on declared gauge conditions.
GAUGE_TOL = 1e-12
# Largest exponent exp() can take without overflowing a double.
_MAX_EXP = math.log(np.finfo(np.float64).max)


class Gauge(enum.Enum):
    MEAN_ZERO = "mean-zero"
    UNIT_EXP = "unit-exp"
    FREE = "free"


@dataclass(frozen=True)
class PotentialFamily:
    """One potential vector per space, tagged with its gauge.

    ``shifts`` records the constants applied by the last gauge change; they
    sum to zero within tolerance whenever present.
    """

    values: tuple
    gauge: Gauge = Gauge.FREE
    shifts: tuple | None = None

    def __post_init__(self):
        vals = []
        for v in self.values:
            arr = np.array(v, dtype=np.float64)
            if arr.ndim != 1:
                raise ShapeMismatch("potentials must be vectors")
            if not np.all(np.isfinite(arr)):
                raise NonFinite("potentials contain NaN or infinite entries")
            arr.flags.writeable = False
            vals.append(arr)
        object.__setattr__(self, "values", tuple(vals))
        if self.shifts is not None:
            sh = tuple(float(s) for s in self.shifts)
            if len(sh) != len(vals):
                raise ShapeMismatch("one shift per component required")
            if abs(sum(sh)) > GAUGE_TOL:
                raise GaugeViolation(f"gauge shifts must sum to zero, got {sum(sh)!r}")
            object.__setattr__(self, "shifts", sh)

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)


def family_values(phi) -> tuple:
    """Accept a PotentialFamily or a plain sequence of vectors."""
    if isinstance(phi, PotentialFamily):
        return phi.values
    return tuple(np.asarray(v, dtype=np.float64) for v in phi)


def marginal_values(mu) -> tuple:
    if isinstance(mu, MarginalFamily):
        return mu.densities
    return tuple(np.asarray(v, dtype=np.float64) for v in mu)


def zero_potentials(problem: ValidatedProblem) -> PotentialFamily:
    return PotentialFamily(
        values=tuple(np.zeros(n) for n in problem.shape), gauge=Gauge.MEAN_ZERO
    )


def _check_family_shape(problem: ValidatedProblem, vals, what: str) -> None:
    if len(vals) != problem.num_marginals:
        raise ShapeMismatch(
            f"{what} has {len(vals)} components for {problem.num_marginals} spaces"
        )
    for v, n in zip(vals, problem.shape):
        if v.shape != (n,):
            raise LengthMismatch(f"{what} component of length {v.size} on {n} atoms")


def log_inner_integrals(problem: ValidatedProblem, phi) -> list:
    """For each i, the log integral of K exp(sum_{j!=i} phi_j) over the others.

    Contraction folds one axis at a time into the kernel, shrinking the
    tensor after every log-sum-exp, so each output marginal costs on the
    order of the kernel size.
    """
    vals = family_values(phi)
    _check_family_shape(problem, vals, "potential family")
    ndim = problem.num_marginals
    out = []
    for i in range(ndim):
        work = problem.kernel.log_values
        for j in range(ndim):
            if j == i:
                continue
            term = vals[j] + problem.spaces[j].log_weights
            work = logsumexp(work + axis_view(term, j, ndim), axis=j, keepdims=True)
        out.append(work.reshape(problem.shape[i]))
    return out


def log_forward_map(problem: ValidatedProblem, phi) -> list:
    """Log of the forward map: component i is phi_i plus its log inner integral."""
    vals = family_values(phi)
    inner = log_inner_integrals(problem, vals)
    return [vals[i] + inner[i] for i in range(problem.num_marginals)]


def forward_map(problem: ValidatedProblem, phi) -> list:
    """Linear-domain forward map; overflow is reported, never saturated."""
    log_t = log_forward_map(problem, phi)
    worst = max(float(np.max(lt)) for lt in log_t)
    if worst > _MAX_EXP:
        raise Overflow(
            f"forward map overflows the linear domain (log value {worst:.3g})"
        )
    return [np.exp(lt) for lt in log_t]


class ResidualInfo(NamedTuple):
    components: list
    norm_l2: float
    norm_linf: float


def marginal_residual(problem: ValidatedProblem, phi, mu) -> ResidualInfo:
    """Forward map minus target, with weighted L2 and sup norms attached."""
    targets = marginal_values(mu)
    _check_family_shape(problem, targets, "target family")
    current = forward_map(problem, phi)
    comps = [c - t for c, t in zip(current, targets)]
    return ResidualInfo(
        components=comps,
        norm_l2=family_norm(problem.spaces, comps, 2),
        norm_linf=family_norm(problem.spaces, comps, math.inf),
    )


def dual_objective(problem: ValidatedProblem, phi, mu) -> float:
    """Concave dual: sum_i <phi_i, mu_i>_m minus the coupling mass.

    The coupling mass integral reuses one log inner integral, staying in the
    log domain until the final exponential.
    """
    vals = family_values(phi)
    targets = marginal_values(mu)
    _check_family_shape(problem, targets, "target family")
    linear = 0.0
    for sp, v, t in zip(problem.spaces, vals, targets):
        linear += float(np.sum(sp.weights * v * t))
    log_t0 = vals[0] + log_inner_integrals(problem, vals)[0]
    log_mass = float(logsumexp(log_t0 + problem.spaces[0].log_weights))
    if log_mass > _MAX_EXP:
        raise Overflow("coupling mass overflows the linear domain")
    return linear - math.exp(log_mass)


def project_mean_zero(spaces, phi) -> PotentialFamily:
    """Shift so the first N-1 components have zero weighted mean.

    The last component absorbs the negated sum of the shifts, keeping the
    forward map unchanged.
    """
    vals = [np.array(v, dtype=np.float64) for v in family_values(phi)]
    if len(vals) != len(spaces):
        raise ShapeMismatch(f"{len(vals)} components for {len(spaces)} spaces")
    shifts = []
    total = 0.0
    for i in range(len(vals) - 1):
        c = float(np.dot(spaces[i].weights, vals[i]))
        vals[i] = vals[i] - c
        shifts.append(-c)
        total += c
    vals[-1] = vals[-1] + total
    shifts.append(total)
    return PotentialFamily(values=tuple(vals), gauge=Gauge.MEAN_ZERO, shifts=tuple(shifts))


def project_unit_exp(spaces, phi) -> PotentialFamily:
    """Shift so exp of each of the first N-1 components has unit integral."""
    vals = [np.array(v, dtype=np.float64) for v in family_values(phi)]
    if len(vals) != len(spaces):
        raise ShapeMismatch(f"{len(vals)} components for {len(spaces)} spaces")
    shifts = []
    total = 0.0
    for i in range(len(vals) - 1):
        lam = -float(logsumexp(vals[i] + spaces[i].log_weights))
        vals[i] = vals[i] + lam
        shifts.append(lam)
        total += lam
    vals[-1] = vals[-1] - total
    shifts.append(-total)
    return PotentialFamily(values=tuple(vals), gauge=Gauge.UNIT_EXP, shifts=tuple(shifts))


def check_gauge(spaces, family: PotentialFamily, tol: float = GAUGE_TOL) -> None:
    """Verify the declared gauge condition; raises GaugeViolation if broken."""
    if family.gauge is Gauge.FREE:
        return
    for i in range(len(family.values) - 1):
        v = family.values[i]
        if family.gauge is Gauge.MEAN_ZERO:
            defect = abs(float(np.dot(spaces[i].weights, v)))
            if defect > tol:
                raise GaugeViolation(
                    f"component {i} has weighted mean {defect:g} above {tol:g}"
                )
        else:
            integral = math.exp(float(logsumexp(v + spaces[i].log_weights)))
            if abs(integral - 1.0) > tol:
                raise GaugeViolation(
                    f"component {i} has exp-integral {integral!r}, expected 1"
                )
