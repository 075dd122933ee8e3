"""Problem data model: weighted discrete spaces, positive kernel tensors,
balanced marginal families, and the validated problem container.

All containers are immutable after construction and validate their own
invariants.  Kernel tensors keep the elementwise logarithm as the primary
representation; linear values are materialized on demand and only that
materialization can fail on underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import (
    LengthMismatch,
    MassImbalance,
    NonFinite,
    NonPositiveEntry,
    ShapeMismatch,
)

# Relative tolerance for the equal-mass condition across marginal components.
MASS_RTOL = 1e-10
# Absolute tolerance for space weights summing to one.
WEIGHT_SUM_TOL = 1e-12


def _frozen_copy(values, dtype=np.float64) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.flags.writeable = False
    return out


def _require_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise NonFinite(f"{what} contains NaN or infinite entries")


def axis_view(vec: np.ndarray, axis: int, ndim: int) -> np.ndarray:
    """Reshape a vector so it broadcasts along one axis of an ndim tensor."""
    shape = [1] * ndim
    shape[axis] = -1
    return np.asarray(vec).reshape(shape)


@dataclass(frozen=True)
class DiscreteSpace:
    """A finite set of atoms carrying strictly positive probability weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.size == 0:
            raise ShapeMismatch("space weights must form a nonempty vector")
        _require_finite(w, "space weights")
        if np.any(w <= 0.0):
            raise NonPositiveEntry("space weights must be strictly positive")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise MassImbalance(
                f"space weights must sum to 1 within {WEIGHT_SUM_TOL:g}, got {total!r}"
            )
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @cached_property
    def log_weights(self) -> np.ndarray:
        return _frozen_copy(np.log(self.weights))


@dataclass(frozen=True)
class KernelTensor:
    """Strictly positive kernel on a product of discrete spaces.

    The logarithm is the primary storage.  ``values`` is derived lazily; if
    any entry flushes to zero in the linear domain that materialization (and
    only it) raises ``NonPositiveEntry``.
    """

    log_values: np.ndarray

    def __post_init__(self):
        lv = np.array(self.log_values, dtype=np.float64)
        if lv.ndim < 1:
            raise ShapeMismatch("kernel must have at least one axis")
        _require_finite(lv, "kernel log-values")
        lv.flags.writeable = False
        object.__setattr__(self, "log_values", lv)

    @classmethod
    def from_values(cls, values, shape: Sequence[int] | None = None) -> "KernelTensor":
        """Build from linear-domain values (flat row-major if shape is given)."""
        v = np.array(values, dtype=np.float64)
        if shape is not None:
            try:
                v = v.reshape(tuple(shape))
            except ValueError as exc:
                raise ShapeMismatch(f"kernel data does not match shape {tuple(shape)}") from exc
        _require_finite(v, "kernel values")
        if np.any(v <= 0.0):
            raise NonPositiveEntry("kernel values must be strictly positive")
        out = cls(log_values=np.log(v))
        # Seed the linear cache with the exact input so user data round-trips.
        v.flags.writeable = False
        out.__dict__["values"] = v
        return out

    @classmethod
    def from_log_values(cls, log_values, shape: Sequence[int] | None = None) -> "KernelTensor":
        lv = np.array(log_values, dtype=np.float64)
        if shape is not None:
            try:
                lv = lv.reshape(tuple(shape))
            except ValueError as exc:
                raise ShapeMismatch(f"kernel data does not match shape {tuple(shape)}") from exc
        return cls(log_values=lv)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.log_values.shape

    @cached_property
    def values(self) -> np.ndarray:
        v = np.exp(self.log_values)
        if np.any(v == 0.0):
            raise NonPositiveEntry(
                "kernel underflows to zero in the linear representation; "
                "keep computations in the log domain"
            )
        v.flags.writeable = False
        return v


@dataclass(frozen=True)
class GibbsSpec:
    """Cost tensor and temperature defining a Gibbs kernel exp(-cost/epsilon)."""

    cost: np.ndarray
    epsilon: float

    def __post_init__(self):
        c = np.array(self.cost, dtype=np.float64)
        _require_finite(c, "cost tensor")
        c.flags.writeable = False
        object.__setattr__(self, "cost", c)
        eps = float(self.epsilon)
        if not math.isfinite(eps):
            raise NonFinite("epsilon must be finite")
        if eps <= 0.0:
            raise NonPositiveEntry("epsilon must be strictly positive")
        object.__setattr__(self, "epsilon", eps)


def build_gibbs_kernel(spec: GibbsSpec) -> KernelTensor:
    """Materialize the Gibbs kernel of a cost tensor, log-domain first."""
    return KernelTensor.from_log_values(-spec.cost / spec.epsilon)


@dataclass(frozen=True)
class MarginalFamily:
    """One strictly positive density per space, sharing a common mass."""

    densities: tuple
    mass: float

    def __post_init__(self):
        ds = tuple(_frozen_copy(d) for d in self.densities)
        if not ds:
            raise ShapeMismatch("a marginal family needs at least one component")
        for d in ds:
            if d.ndim != 1:
                raise ShapeMismatch("marginal densities must be vectors")
            _require_finite(d, "marginal densities")
            if np.any(d <= 0.0):
                raise NonPositiveEntry("marginal densities must be strictly positive")
        object.__setattr__(self, "densities", ds)
        object.__setattr__(self, "mass", float(self.mass))

    @classmethod
    def balanced(cls, spaces: Sequence[DiscreteSpace], densities) -> "MarginalFamily":
        """Build from densities, checking the equal-mass condition."""
        ds = [np.asarray(d, dtype=np.float64) for d in densities]
        if len(ds) != len(spaces):
            raise ShapeMismatch(
                f"{len(ds)} densities for {len(spaces)} spaces"
            )
        for d, sp in zip(ds, spaces):
            if d.shape != (sp.n,):
                raise LengthMismatch(
                    f"density of length {d.size} on a space with {sp.n} atoms"
                )
        masses = family_masses(spaces, ds)
        mass = float(np.mean(masses))
        spread = float(masses.max() - masses.min())
        if spread > MASS_RTOL * mass:
            raise MassImbalance(
                f"marginal masses disagree: spread {spread:g} exceeds "
                f"{MASS_RTOL:g} relative to mass {mass:g}"
            )
        return cls(densities=tuple(ds), mass=mass)


@dataclass(frozen=True)
class ValidatedProblem:
    """Spaces, kernel, and target marginals that passed cross-validation."""

    spaces: tuple
    kernel: KernelTensor
    target: MarginalFamily

    @property
    def num_marginals(self) -> int:
        return len(self.spaces)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(sp.n for sp in self.spaces)

    @cached_property
    def log_weight_tensor(self) -> np.ndarray:
        """Sum of log-weights broadcast over the product space."""
        ndim = self.num_marginals
        out = np.zeros(self.shape)
        for j, sp in enumerate(self.spaces):
            out = out + axis_view(sp.log_weights, j, ndim)
        out.flags.writeable = False
        return out


def validate_problem(spaces, kernel: KernelTensor, target) -> ValidatedProblem:
    """Cross-validate spaces, kernel, and marginals into one container.

    Idempotent: revalidating the pieces of a ValidatedProblem succeeds and
    reproduces it.  Raises ShapeMismatch, NonPositiveEntry, MassImbalance, or
    NonFinite depending on the first violated invariant.
    """
    sps = tuple(sp if isinstance(sp, DiscreteSpace) else DiscreteSpace(sp) for sp in spaces)
    if not sps:
        raise ShapeMismatch("a problem needs at least one space")
    if not isinstance(kernel, KernelTensor):
        kernel = KernelTensor.from_values(kernel)
    expected = tuple(sp.n for sp in sps)
    if kernel.shape != expected:
        raise ShapeMismatch(
            f"kernel shape {kernel.shape} does not match space sizes {expected}"
        )
    if isinstance(target, MarginalFamily):
        target = MarginalFamily.balanced(sps, target.densities)
    else:
        target = MarginalFamily.balanced(sps, target)
    return ValidatedProblem(spaces=sps, kernel=kernel, target=target)


def weighted_norm(space: DiscreteSpace, values, p) -> float:
    """Weighted L2 or sup norm of a function on one space."""
    v = np.asarray(values, dtype=np.float64)
    if v.shape != (space.n,):
        raise LengthMismatch(
            f"vector of length {v.size} on a space with {space.n} atoms"
        )
    if p == 2:
        return float(np.sqrt(np.sum(space.weights * v * v)))
    if p == math.inf:
        return float(np.max(np.abs(v))) if v.size else 0.0
    raise ValueError("p must be 2 or math.inf")


def family_norm(spaces, values, p) -> float:
    """Norm of a family: root of summed squares for p=2, overall sup for p=inf."""
    vals = list(values)
    if len(vals) != len(spaces):
        raise ShapeMismatch(f"{len(vals)} components for {len(spaces)} spaces")
    if p == 2:
        return float(math.sqrt(sum(weighted_norm(sp, v, 2) ** 2 for sp, v in zip(spaces, vals))))
    if p == math.inf:
        return max(weighted_norm(sp, v, math.inf) for sp, v in zip(spaces, vals))
    raise ValueError("p must be 2 or math.inf")


def family_masses(spaces, values) -> np.ndarray:
    """Weighted total of each component, as a vector."""
    return np.array(
        [float(np.dot(sp.weights, np.asarray(v, dtype=np.float64))) for sp, v in zip(spaces, values)]
    )
