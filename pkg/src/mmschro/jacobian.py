"""Derivative of the forward map at a potential family.

The derivative of the log forward map is the identity plus a compact
smoothing part: component i of the compact part evaluates the conditional
expectation, under the coupling induced by phi, of the sum of the other
components.  The operator has an (N-1)-dimensional nullspace of blockwise
constants summing to zero, and its range is cut out by one scalar matching
condition per pair of components.

Two independent evaluation routes are provided on purpose: the operator
apply path contracts the full weighted tensor directly (and is never size
capped), while the dense assembly path builds pairwise conditional
marginals (capped by total atom count).  Tests compare the two.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from scipy.special import logsumexp

from .errors import NotInRange, ShapeMismatch, SizeCapExceeded
from .problem import ValidatedProblem, axis_view, family_norm
from .schroedinger import (
    Gauge,
    PotentialFamily,
    _check_family_shape,
    family_values,
    log_forward_map,
    project_mean_zero,
)

# Default cap on the total atom count for dense assembly and solves.
DENSE_SIZE_CAP = 4096
# Singular values at or below this fraction of the largest count as kernel.
KERNEL_THRESHOLD = 1e-8
# Relative tolerances of the restricted solve.
_MASS_EQUAL_RTOL = 1e-8
_SOLVE_RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True)
class JacobianOperator:
    """Forward-map derivative frozen at one potential family.

    Caches the log forward map, the log coupling density, the weighted log
    tensor and the log coupling mass; dense assembly is built lazily.
    """

    problem: ValidatedProblem
    phi: tuple
    log_forward: tuple
    log_density: np.ndarray
    log_weighted: np.ndarray
    log_mass: float

    @cached_property
    def _dense(self) -> np.ndarray:
        return _assemble_blocks(self)

    def marginal_log_probability(self, i: int) -> np.ndarray:
        """Log probability vector of component i under the induced coupling."""
        return self.log_forward[i] + self.problem.spaces[i].log_weights - self.log_mass


def build_jacobian(problem: ValidatedProblem, phi) -> JacobianOperator:
    vals = family_values(phi)
    _check_family_shape(problem, vals, "potential family")
    ndim = problem.num_marginals
    log_density = np.array(problem.kernel.log_values)
    for j in range(ndim):
        log_density = log_density + axis_view(vals[j], j, ndim)
    log_weighted = log_density + problem.log_weight_tensor
    log_mass = float(logsumexp(log_weighted))
    log_density.flags.writeable = False
    log_weighted.flags.writeable = False
    return JacobianOperator(
        problem=problem,
        phi=tuple(np.array(v) for v in vals),
        log_forward=tuple(log_forward_map(problem, vals)),
        log_density=log_density,
        log_weighted=log_weighted,
        log_mass=log_mass,
    )


def _other_axes(ndim: int, i: int) -> tuple:
    return tuple(j for j in range(ndim) if j != i)


def apply_conditional_expectation(jac: JacobianOperator, h) -> list:
    """Compact part: conditional expectation of the sum of the other components.

    Works on the full weighted tensor with a per-output-atom max shift, so
    the ratio of contractions is immune to the overall scale of the coupling.
    """
    problem = jac.problem
    vals = family_values(h)
    _check_family_shape(problem, vals, "direction family")
    ndim = problem.num_marginals
    total = np.zeros(problem.shape)
    for j in range(ndim):
        total = total + axis_view(vals[j], j, ndim)
    out = []
    for i in range(ndim):
        axes = _other_axes(ndim, i)
        shift = jac.log_weighted.max(axis=axes, keepdims=True)
        weights = np.exp(jac.log_weighted - shift)
        numer = np.sum(weights * (total - axis_view(vals[i], i, ndim)), axis=axes)
        denom = np.sum(weights, axis=axes)
        out.append(numer / denom)
    return out


def apply_log_jacobian(jac: JacobianOperator, h) -> list:
    """Derivative of the log forward map: identity plus the compact part."""
    vals = family_values(h)
    smooth = apply_conditional_expectation(jac, vals)
    return [vals[i] + smooth[i] for i in range(len(vals))]


def apply_jacobian(jac: JacobianOperator, h) -> list:
    """Derivative of the forward map: forward values times the log derivative."""
    log_jac = apply_log_jacobian(jac, h)
    return [np.exp(lt) * g for lt, g in zip(jac.log_forward, log_jac)]


def _check_cap(jac: JacobianOperator, cap: int | None) -> None:
    limit = DENSE_SIZE_CAP if cap is None else int(cap)
    total = sum(jac.problem.shape)
    if total > limit:
        raise SizeCapExceeded(
            f"dense assembly over {total} atoms exceeds the cap of {limit}; "
            "use the operator apply path instead"
        )


def _assemble_blocks(jac: JacobianOperator) -> np.ndarray:
    """Dense matrix of the log-forward derivative via pairwise conditionals."""
    problem = jac.problem
    ndim = problem.num_marginals
    sizes = problem.shape
    offsets = np.insert(np.cumsum(sizes), 0, 0)
    total = int(offsets[-1])
    out = np.eye(total)
    log_marg = [
        jac.log_forward[i] + problem.spaces[i].log_weights for i in range(ndim)
    ]
    for i in range(ndim):
        for j in range(i + 1, ndim):
            axes = tuple(k for k in range(ndim) if k not in (i, j))
            log_pair = logsumexp(jac.log_weighted, axis=axes) if axes else np.array(
                jac.log_weighted
            )
            # Conditional weight of x_j given x_i, and the transpose direction.
            block_ij = np.exp(log_pair - log_marg[i][:, None])
            block_ji = np.exp(log_pair.T - log_marg[j][:, None])
            out[offsets[i]:offsets[i + 1], offsets[j]:offsets[j + 1]] = block_ij
            out[offsets[j]:offsets[j + 1], offsets[i]:offsets[i + 1]] = block_ji
    return out


def assemble_dense(jac: JacobianOperator, cap: int | None = None) -> np.ndarray:
    """Dense log-forward derivative (identity plus conditional blocks)."""
    _check_cap(jac, cap)
    return np.array(jac._dense)


def stack_family(values) -> np.ndarray:
    return np.concatenate([np.asarray(v, dtype=np.float64) for v in values])


def split_vector(sizes, vec: np.ndarray) -> list:
    offsets = np.insert(np.cumsum(sizes), 0, 0)
    return [np.array(vec[offsets[i]:offsets[i + 1]]) for i in range(len(sizes))]


def _gauge_rows(problem: ValidatedProblem) -> np.ndarray:
    """N-1 normalized rows expressing the mean-zero conditions."""
    sizes = problem.shape
    offsets = np.insert(np.cumsum(sizes), 0, 0)
    rows = np.zeros((problem.num_marginals - 1, int(offsets[-1])))
    for i in range(problem.num_marginals - 1):
        w = problem.spaces[i].weights
        rows[i, offsets[i]:offsets[i + 1]] = w / np.linalg.norm(w)
    return rows


def range_defect(jac: JacobianOperator, theta) -> float:
    """Violation of the range condition: the weighted pairings of theta with
    the forward values must agree across components."""
    problem = jac.problem
    vals = family_values(theta)
    _check_family_shape(problem, vals, "range candidate")
    pairings = [
        float(np.sum(sp.weights * np.exp(lt) * v))
        for sp, lt, v in zip(problem.spaces, jac.log_forward, vals)
    ]
    spread = max(pairings) - min(pairings)
    return spread / max(1.0, abs(pairings[0]))


def solve_restricted(jac: JacobianOperator, theta, cap: int | None = None) -> PotentialFamily:
    """Solve the linearized system for a right-hand side in the range.

    Scales the right-hand side by the inverse forward values, stacks the
    mean-zero gauge rows under the dense log-forward derivative, and solves
    the full-column-rank least-squares system by orthogonal factorization.
    The least-squares residual doubles as a range certificate.
    """
    problem = jac.problem
    vals = family_values(theta)
    _check_family_shape(problem, vals, "right-hand side")
    _check_cap(jac, cap)

    masses = np.array(
        [float(np.sum(sp.weights * v)) for sp, v in zip(problem.spaces, vals)]
    )
    scale = max(
        float(np.max(np.abs(masses))),
        max(
            float(np.sum(sp.weights * np.abs(v)))
            for sp, v in zip(problem.spaces, vals)
        ),
    )
    # Masses computed from a near-solution residual cancel two O(coupling)
    # quantities, so they carry absolute rounding noise at that scale even
    # when mathematically equal; the floor keeps the relative test honest.
    noise_floor = 256.0 * np.finfo(np.float64).eps * max(1.0, math.exp(jac.log_mass))
    spread = float(masses.max() - masses.min())
    if spread > max(_MASS_EQUAL_RTOL * scale, noise_floor):
        raise NotInRange(
            f"right-hand side masses disagree (spread {spread:g} over scale {scale:g})"
        )

    scaled = [v * np.exp(-lt) for v, lt in zip(vals, jac.log_forward)]
    rhs_vec = stack_family(scaled)
    matrix = jac._dense
    gauge = _gauge_rows(problem)
    stacked = np.vstack([matrix, gauge])
    rhs = np.concatenate([rhs_vec, np.zeros(gauge.shape[0])])
    solution, _, _, _ = scipy.linalg.lstsq(stacked, rhs, lapack_driver="gelsy")

    defect = float(np.max(np.abs(matrix @ solution - rhs_vec)))
    # The scaled right-hand side is a relative-residual-like quantity, so a
    # right-hand side assembled from near-cancelling data carries absolute
    # eps-level noise with a component outside the range that no solution
    # can absorb; the floor keeps the certificate meaningful at that scale.
    rhs_sup = float(np.max(np.abs(rhs_vec)))
    noise_floor = 256.0 * np.finfo(np.float64).eps * (1.0 + rhs_sup)
    tol = max(_SOLVE_RESIDUAL_RTOL * rhs_sup, noise_floor)
    if defect > tol:
        raise NotInRange(
            f"right-hand side is not in the range: residual {defect:g} exceeds {tol:g}"
        )
    parts = split_vector(problem.shape, solution)
    return project_mean_zero(problem.spaces, parts)


class SpectrumResult:
    """Full singular spectrum plus the numerical nullspace basis."""

    def __init__(self, singular_values: np.ndarray, kernel_basis: np.ndarray):
        self.singular_values = singular_values
        self.kernel_basis = kernel_basis

    @property
    def kernel_dimension(self) -> int:
        return self.kernel_basis.shape[1]

    @property
    def smallest_nonzero(self) -> float:
        sv = self.singular_values
        cut = KERNEL_THRESHOLD * sv[0]
        nonzero = sv[sv > cut]
        return float(nonzero[-1]) if nonzero.size else 0.0


def _sqrt_weight_vector(problem: ValidatedProblem) -> np.ndarray:
    return np.concatenate([np.sqrt(sp.weights) for sp in problem.spaces])


def nullspace_spectrum(jac: JacobianOperator, cap: int | None = None) -> SpectrumResult:
    """Singular spectrum of the log-forward derivative in the weighted geometry.

    The returned kernel basis columns live in the original coordinates and
    are orthonormal with respect to the weighted inner product.
    """
    _check_cap(jac, cap)
    root = _sqrt_weight_vector(jac.problem)
    sym = jac._dense * root[:, None] / root[None, :]
    _, sv, vt = np.linalg.svd(sym)
    mask = sv <= KERNEL_THRESHOLD * sv[0]
    basis = (vt[mask].T / root[:, None]) if mask.any() else np.zeros((root.size, 0))
    return SpectrumResult(singular_values=sv, kernel_basis=basis)


def analytic_kernel_basis(problem: ValidatedProblem) -> np.ndarray:
    """Blockwise-constant vectors with constants summing to zero (columns)."""
    sizes = problem.shape
    ndim = problem.num_marginals
    cols = []
    for i in range(ndim - 1):
        consts = np.zeros(ndim)
        consts[i] = 1.0
        consts[-1] = -1.0
        cols.append(np.concatenate([np.full(n, c) for n, c in zip(sizes, consts)]))
    return np.stack(cols, axis=1) if cols else np.zeros((sum(sizes), 0))


def analytic_kernel_angle(problem: ValidatedProblem, basis: np.ndarray) -> float:
    """Largest principal angle between a basis and the analytic nullspace,
    measured in the weighted geometry."""
    if basis.shape[1] == 0:
        return math.pi / 2
    root = _sqrt_weight_vector(problem)
    numeric = basis * root[:, None]
    analytic = analytic_kernel_basis(problem) * root[:, None]
    angles = scipy.linalg.subspace_angles(numeric, analytic)
    return float(np.max(angles)) if angles.size else 0.0
