"""Primal couplings and entropy certificates.

The coupling induced by a potential family has log density equal to the log
kernel plus the broadcast sum of the potentials.  Its relative entropy with
respect to the kernel-weighted base measure uses the normalization where the
entropy of the kernel coupling itself is minus its mass; both sides of the
duality comparison use the same convention, so gaps are convention-free.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .errors import MassImbalance, NonFinite, NonPositiveEntry, ShapeMismatch
from .problem import (
    KernelTensor,
    MarginalFamily,
    ValidatedProblem,
    axis_view,
    family_masses,
)
from .schroedinger import (
    _check_family_shape,
    dual_objective,
    family_values,
    marginal_values,
)

_BALANCE_RTOL = 1e-10


@dataclass(frozen=True)
class Coupling:
    """A nonnegative measure on the product space, stored in the log domain."""

    log_density: np.ndarray
    mass: float

    def __post_init__(self):
        ld = np.array(self.log_density, dtype=np.float64)
        if np.any(np.isnan(ld)) or np.any(ld == np.inf):
            raise NonFinite("coupling log-density contains NaN or +inf")
        ld.flags.writeable = False
        object.__setattr__(self, "log_density", ld)
        m = float(self.mass)
        if not (m > 0.0 and math.isfinite(m)):
            raise NonPositiveEntry("coupling mass must be positive and finite")
        object.__setattr__(self, "mass", m)


def coupling_from_potentials(problem: ValidatedProblem, phi) -> Coupling:
    """The coupling whose log density is the log kernel plus the potentials."""
    vals = family_values(phi)
    _check_family_shape(problem, vals, "potential family")
    ndim = problem.num_marginals
    log_density = np.array(problem.kernel.log_values)
    for j in range(ndim):
        log_density = log_density + axis_view(vals[j], j, ndim)
    log_mass = float(logsumexp(log_density + problem.log_weight_tensor))
    return Coupling(log_density=log_density, mass=math.exp(log_mass))


def _log_weight_tensor(spaces, shape):
    ndim = len(shape)
    out = np.zeros(shape)
    for j, sp in enumerate(spaces):
        out = out + axis_view(sp.log_weights, j, ndim)
    return out


def coupling_marginals(coupling: Coupling, spaces) -> list:
    """Density of each marginal of the coupling with respect to its space."""
    shape = coupling.log_density.shape
    if len(spaces) != len(shape) or tuple(sp.n for sp in spaces) != shape:
        raise ShapeMismatch("spaces do not match the coupling shape")
    weighted = coupling.log_density + _log_weight_tensor(spaces, shape)
    out = []
    for i in range(len(shape)):
        axes = tuple(j for j in range(len(shape)) if j != i)
        log_marg = logsumexp(weighted, axis=axes) - spaces[i].log_weights
        out.append(np.exp(log_marg))
    return out


def relative_entropy(coupling: Coupling, kernel: KernelTensor, spaces) -> float:
    """Entropy of the coupling relative to the kernel-weighted base measure.

    The integrand mixes signs, so the sum runs in the linear domain after a
    global max shift of the weighted log density.
    """
    if kernel.shape != coupling.log_density.shape:
        raise ShapeMismatch("kernel and coupling shapes disagree")
    weighted = coupling.log_density + _log_weight_tensor(spaces, kernel.shape)
    shift = float(np.max(weighted))
    integrand = coupling.log_density - kernel.log_values - 1.0
    return math.exp(shift) * float(np.sum(np.exp(weighted - shift) * integrand))


def duality_gap(problem: ValidatedProblem, phi, mu) -> float:
    """Primal entropy of the induced coupling minus the dual objective.

    Zero at solutions; nonnegative whenever the coupling actually has the
    target marginals.
    """
    coupling = coupling_from_potentials(problem, phi)
    primal = relative_entropy(coupling, problem.kernel, problem.spaces)
    return primal - dual_objective(problem, phi, mu)


def product_feasible_coupling(mu, spaces) -> Coupling:
    """Normalized product of the target marginals; feasible by construction."""
    targets = marginal_values(mu)
    if len(targets) != len(spaces):
        raise ShapeMismatch(f"{len(targets)} densities for {len(spaces)} spaces")
    for t, sp in zip(targets, spaces):
        if t.shape != (sp.n,):
            raise ShapeMismatch("density length does not match its space")
    masses = family_masses(spaces, targets)
    mass = float(np.mean(masses))
    if float(masses.max() - masses.min()) > _BALANCE_RTOL * mass:
        raise MassImbalance("marginals must share a common mass")
    ndim = len(spaces)
    shape = tuple(sp.n for sp in spaces)
    log_density = np.full(shape, -(ndim - 1) * math.log(mass))
    for j in range(ndim):
        log_density = log_density + axis_view(np.log(targets[j]), j, ndim)
    return Coupling(log_density=log_density, mass=mass)
