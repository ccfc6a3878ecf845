"""Semidefinite relaxation of the sparse generalized eigenvalue problem.

Dinkelbach updates on the ratio, ADMM on each parametric problem. Any dual iterate ``W``
certifies ``lambda_max(A - tB - W) + k max|W_ij|`` as an upper bound.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from sparsemr.config import SDP_MAX_ITER, SDP_TOL
from sparsemr.exceptions import DomainError
from sparsemr.models.geneig import regularize
from sparsemr.models.problem import (
    SolverMethod,
    SparsePortfolio,
    SparseProblem,
    make_portfolio,
    solve_on_support,
)

logger = logging.getLogger(__name__)

CHECK_EVERY = 10
RESIDUAL_GAP = 10.0
PENALTY_FACTOR = 2.0
ADVANCE_FRACTION = 0.25


@dataclass(frozen=True)
class RelaxationResult:
    x: np.ndarray
    b: np.ndarray
    lower_bound: float
    upper_bound: float
    certified: bool
    iterations: int

    @property
    def relaxation_matrix(self) -> np.ndarray:
        """``Y* = X* / Tr(B X*)`` in the linear form of the relaxation."""
        return self.x / float(np.trace(self.b @ self.x))


def project_simplex(values: np.ndarray) -> np.ndarray:
    """Euclidean projection onto ``{w >= 0, sum w = 1}``."""
    ordered = np.sort(values)[::-1]
    cumulative = np.cumsum(ordered) - 1.0
    index = np.arange(1, values.size + 1)
    last = index[ordered - cumulative / index > 0][-1]
    theta = cumulative[last - 1] / last
    return np.maximum(values - theta, 0.0)


def project_spectraplex(m: np.ndarray) -> np.ndarray:
    w, v = linalg.eigh(0.5 * (m + m.T))
    return (v * project_simplex(w)) @ v.T


def project_l1_ball(m: np.ndarray, radius: float) -> np.ndarray:
    flat = m.ravel()
    magnitude = np.abs(flat)
    if magnitude.sum() <= radius:
        return m
    ordered = np.sort(magnitude)[::-1]
    cumulative = np.cumsum(ordered) - radius
    index = np.arange(1, flat.size + 1)
    last = index[ordered - cumulative / index > 0][-1]
    theta = cumulative[last - 1] / last
    return (np.sign(flat) * np.maximum(magnitude - theta, 0.0)).reshape(m.shape)


def _feasible(x: np.ndarray, k: int, anchor: int) -> np.ndarray:
    """Mix ``x`` with ``e_anchor e_anchor'`` until the l1 constraint holds."""
    total = float(np.abs(x).sum())
    if total <= k:
        return x
    theta = (total - k) / (total - 1.0)
    mixed = (1.0 - theta) * x
    mixed[anchor, anchor] += theta
    return mixed


def _ratio(a: np.ndarray, b: np.ndarray, x: np.ndarray) -> float:
    return float(np.sum(a * x)) / float(np.sum(b * x))


def solve_relaxation(
    a: np.ndarray,
    b: np.ndarray,
    k: int,
    tol: float = SDP_TOL,
    max_iter: int = SDP_MAX_ITER,
) -> RelaxationResult:
    n = a.shape[0]
    if not 1 <= k <= n:
        raise DomainError(f"cardinality k={k} outside 1..{n}")
    b_min = float(linalg.eigvalsh(b)[0])
    if b_min <= 0:
        raise DomainError("relaxation needs a positive-definite denominator")

    diagonal = np.diag(a) / np.diag(b)
    anchor = int(np.argmax(diagonal))
    best = np.zeros((n, n))
    best[anchor, anchor] = 1.0
    lower = t = float(diagonal[anchor])
    upper = math.inf

    x = best.copy()
    z = best.copy()
    u = np.zeros((n, n))
    m = a - t * b
    penalty = max(float(np.linalg.norm(m, 2)), 1e-8)
    iterations = 0
    certified = False
    while iterations < max_iter:
        iterations += 1
        x = project_spectraplex(z - u + m / penalty)
        z_prev = z
        z = project_l1_ball(x + u, k)
        u = u + x - z
        if iterations % CHECK_EVERY:
            continue

        dual = penalty * u
        inner_upper = float(linalg.eigvalsh(m - dual)[-1]) + k * float(np.max(np.abs(dual)))
        upper = min(upper, t + max(inner_upper, 0.0) / b_min)
        candidate = _feasible(x, k, anchor)
        inner_lower = float(np.sum(m * candidate))
        ratio = _ratio(a, b, candidate)
        if ratio > lower:
            lower, best = ratio, candidate
        if upper - lower <= tol * max(1.0, abs(upper)):
            certified = True
            break
        if lower > t and inner_upper - inner_lower <= ADVANCE_FRACTION * max(inner_lower, 0.0):
            t = lower
            m = a - t * b
            logger.debug(
                "SDP iter %d: t -> %.10g, bounds [%.10g, %.10g]", iterations, t, lower, upper
            )
            continue

        primal = float(np.linalg.norm(x - z))
        dual_residual = penalty * float(np.linalg.norm(z - z_prev))
        if primal > RESIDUAL_GAP * dual_residual:
            penalty *= PENALTY_FACTOR
            u /= PENALTY_FACTOR
        elif dual_residual > RESIDUAL_GAP * primal:
            penalty /= PENALTY_FACTOR
            u *= PENALTY_FACTOR

    if not certified:
        logger.warning(
            "SDP relaxation not certified after %d iterations: bounds [%.8g, %.8g]",
            iterations,
            lower,
            upper,
        )
    return RelaxationResult(
        x=best,
        b=b,
        lower_bound=lower,
        upper_bound=upper,
        certified=certified,
        iterations=iterations,
    )


def round_relaxation(
    problem: SparseProblem, relaxation: RelaxationResult, labels: tuple[str, ...] = ()
) -> SparsePortfolio:
    """Truncate the leading eigenvector of the relaxed solution to k entries and re-solve."""
    oriented = problem.oriented()
    _, vectors = linalg.eigh(relaxation.x)
    leading = vectors[:, -1]
    support = np.sort(np.argsort(-np.abs(leading), kind="stable")[: problem.k])
    _, weights = solve_on_support(oriented, support)
    return make_portfolio(
        problem,
        weights,
        support,
        SolverMethod.SDP,
        labels=labels,
        upper_bound=relaxation.upper_bound,
        certified=relaxation.certified,
    )


def sdp_relaxation(
    problem: SparseProblem,
    labels: tuple[str, ...] = (),
    tol: float = SDP_TOL,
    max_iter: int = SDP_MAX_ITER,
) -> tuple[SparsePortfolio, float]:
    """Rounded portfolio and the certified bound on the maximized quotient."""
    oriented = regularize(problem.oriented())
    relaxation = solve_relaxation(oriented.a, oriented.effective_b, problem.k, tol, max_iter)
    portfolio = round_relaxation(problem, relaxation, labels=labels)
    return portfolio, relaxation.upper_bound
