"""Shared builders, fixtures, and brute-force reference implementations.

Every reference implementation in this file deliberately avoids the package's
optimized paths: forward maps, conditional expectations, dense operators,
coupling marginals, and entropies are recomputed with explicit Python loops
over ``np.ndindex`` in the linear domain.  Tests compare the fast log-domain
code against these slow but independently derived answers.
"""

from __future__ import annotations

import math

import numpy as np
import pytest

from mmschro import (
    DiscreteSpace,
    KernelTensor,
    MarginalFamily,
    forward_map,
    project_mean_zero,
    validate_problem,
)


# ---------------------------------------------------------------------------
# builders


def make_spaces(rng, sizes):
    """Random strictly positive weights, normalized to probability vectors."""
    spaces = []
    for n in sizes:
        w = rng.uniform(0.5, 1.5, size=n)
        spaces.append(DiscreteSpace(weights=w / w.sum()))
    return spaces


def planted_instance(rng, sizes, kernel_low=0.1, kernel_high=10.0):
    """Random instance with a known solution.

    Draws a kernel with entries in [kernel_low, kernel_high] and a mean-zero
    potential family, then uses the forward image of that family as the
    target marginals.  Returns ``(problem, star)`` where ``star`` solves the
    system for ``problem`` by construction.
    """
    spaces = make_spaces(rng, sizes)
    kernel = KernelTensor.from_values(
        rng.uniform(kernel_low, kernel_high, size=tuple(sizes))
    )
    star = project_mean_zero(
        spaces, [rng.uniform(-1.0, 1.0, size=n) for n in sizes]
    )
    probe = validate_problem(
        spaces, kernel, MarginalFamily.balanced(spaces, [np.ones(n) for n in sizes])
    )
    mu = forward_map(probe, star)
    problem = validate_problem(spaces, kernel, MarginalFamily.balanced(spaces, mu))
    return problem, star


def random_directions(rng, sizes, count):
    """A list of standard-normal direction families."""
    return [[rng.standard_normal(n) for n in sizes] for _ in range(count)]


def gauge_distance(spaces, a, b):
    """Sup-norm distance between two families after mean-zero projection."""
    pa = project_mean_zero(spaces, a)
    pb = project_mean_zero(spaces, b)
    return max(
        float(np.max(np.abs(x - y))) for x, y in zip(pa.values, pb.values)
    )


# ---------------------------------------------------------------------------
# brute-force oracles (explicit loops, linear domain)


def brute_forward(problem, values):
    """Marginal densities of K·e^{Σφ} by explicit enumeration."""
    shape = problem.shape
    kernel = problem.kernel.values
    sums = [np.zeros(n) for n in shape]
    for idx in np.ndindex(*shape):
        term = float(kernel[idx])
        for j, x in enumerate(idx):
            term *= math.exp(values[j][x]) * problem.spaces[j].weights[x]
        for i, x in enumerate(idx):
            sums[i][x] += term
    # The loop integrated over every axis; dividing by the i-th weight turns
    # the atom mass back into a density with respect to that space.
    return [s / sp.weights for s, sp in zip(sums, problem.spaces)]


def brute_conditional(problem, values, direction):
    """Conditional expectation of Σ_{j≠i} h_j given the i-th coordinate."""
    shape = problem.shape
    kernel = problem.kernel.values
    num = [np.zeros(n) for n in shape]
    den = [np.zeros(n) for n in shape]
    for idx in np.ndindex(*shape):
        w = float(kernel[idx])
        for j, x in enumerate(idx):
            w *= math.exp(values[j][x]) * problem.spaces[j].weights[x]
        for i, x in enumerate(idx):
            others = sum(
                direction[j][idx[j]] for j in range(len(shape)) if j != i
            )
            num[i][x] += w * others
            den[i][x] += w
    return [n_ / d_ for n_, d_ in zip(num, den)]


def brute_dense_log_jacobian(problem, values):
    """Matrix of h ↦ h + (conditional expectation of the others), by columns."""
    sizes = problem.shape
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    cols = []
    for j, n in enumerate(sizes):
        for k in range(n):
            h = [np.zeros(sz) for sz in sizes]
            h[j][k] = 1.0
            col = np.concatenate(brute_conditional(problem, values, h))
            col[offsets[j] + k] += 1.0
            cols.append(col)
    return np.column_stack(cols)


def brute_coupling_marginals(spaces, log_density):
    """Per-space marginal densities of a coupling, by explicit summation."""
    dens = np.exp(np.asarray(log_density, dtype=np.float64))
    out = []
    for i, space in enumerate(spaces):
        vals = np.zeros(space.n)
        for idx in np.ndindex(*dens.shape):
            w = 1.0
            for j, x in enumerate(idx):
                if j != i:
                    w *= spaces[j].weights[x]
            vals[idx[i]] += dens[idx] * w
        out.append(vals)
    return out


def brute_relative_entropy(spaces, log_density, log_kernel):
    """∫ γ·(log γ − log K − 1) against the product weights, term by term."""
    total = 0.0
    log_density = np.asarray(log_density, dtype=np.float64)
    log_kernel = np.asarray(log_kernel, dtype=np.float64)
    for idx in np.ndindex(*log_density.shape):
        w = 1.0
        for j, x in enumerate(idx):
            w *= spaces[j].weights[x]
        g = math.exp(log_density[idx])
        total += w * g * (log_density[idx] - log_kernel[idx] - 1.0)
    return total


def classic_two_marginal(kernel, weights, mu, iterations=5000, tol=1e-14):
    """Textbook scaling-vector iteration for the two-marginal system.

    Works on the kernel matrix directly in the linear domain and returns the
    log scaling vectors.  Coded against the classical matrix recursion,
    independent of the package's tensor machinery.
    """
    k = np.asarray(kernel, dtype=np.float64)
    m1, m2 = (np.asarray(w.weights if hasattr(w, "weights") else w, np.float64) for w in weights)
    mu1, mu2 = (np.asarray(v, dtype=np.float64) for v in mu)
    u = np.ones_like(mu1)
    v = np.ones_like(mu2)
    for _ in range(iterations):
        u = mu1 / (k @ (v * m2))
        v = mu2 / (k.T @ (u * m1))
        err = float(np.max(np.abs(u * (k @ (v * m2)) - mu1)))
        err = max(err, float(np.max(np.abs(v * (k.T @ (u * m1)) - mu2))))
        if err <= tol:
            break
    return np.log(u), np.log(v)


def central_difference(problem, values, direction, step=1e-5):
    """Central finite difference of the forward map along one direction."""
    plus = forward_map(
        problem, [v + step * d for v, d in zip(values, direction)]
    )
    minus = forward_map(
        problem, [v - step * d for v, d in zip(values, direction)]
    )
    return [(p - q) / (2.0 * step) for p, q in zip(plus, minus)]


# ---------------------------------------------------------------------------
# fixtures


@pytest.fixture
def one_point():
    """Two one-atom spaces with kernel value 2: everything is computable by hand."""
    spaces = [DiscreteSpace(weights=[1.0]), DiscreteSpace(weights=[1.0])]
    kernel = KernelTensor.from_values([[2.0]])
    target = MarginalFamily.balanced(spaces, [[2.0], [2.0]])
    return validate_problem(spaces, kernel, target)


@pytest.fixture
def uniform_cube():
    """Three uniform spaces with a constant kernel: zero potentials solve it."""
    sizes = (3, 4, 2)
    spaces = [DiscreteSpace(weights=np.full(n, 1.0 / n)) for n in sizes]
    kernel = KernelTensor.from_values(np.ones(sizes))
    target = MarginalFamily.balanced(spaces, [np.ones(n) for n in sizes])
    return validate_problem(spaces, kernel, target)


@pytest.fixture
def planted():
    """A three-marginal planted instance shared across module tests."""
    rng = np.random.default_rng(42)
    return planted_instance(rng, (4, 3, 5))
