from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Sequence

import networkx as nx
import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from sparsemr.config import EDGE_THRESHOLD, GLASSO_MAX_SWEEPS, GLASSO_TOL
from sparsemr.data.panel import TimePanel, select_columns
from sparsemr.exceptions import ConditioningError, DomainError
from sparsemr.models import graph as graphs
from sparsemr.models.estimation import coordinate_descent
from sparsemr.models.geneig import symmetrize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PrecisionEstimate:
    """Penalized inverse covariance with its dependence graph.

    ``edge_threshold`` is absolute: ``EDGE_THRESHOLD * max|x|`` at estimation time.
    """

    x: np.ndarray
    rho: float
    edge_threshold: float
    graph: nx.Graph
    clusters: tuple[tuple[int, ...], ...]
    kkt_residual: float
    sweeps: int
    converged: bool
    penalize_diagonal: bool = True
    trace: tuple[float, ...] = ()
    labels: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.x.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.graph.number_of_edges())

    def to_dict(self) -> dict[str, Any]:
        return {
            "rho": self.rho,
            "edge_threshold": self.edge_threshold,
            "penalize_diagonal": self.penalize_diagonal,
            "kkt_residual": self.kkt_residual,
            "sweeps": self.sweeps,
            "converged": self.converged,
            "labels": list(self.labels),
            "x": self.x.tolist(),
            "clusters": [list(c) for c in self.clusters],
            "edges": graphs.edge_table(self.graph, self.labels),
        }


@dataclass
class _BlockState:
    members: list[int]
    betas: dict[int, np.ndarray] = field(default_factory=dict)


def glasso_objective(
    x: np.ndarray, sigma: np.ndarray, rho: float, penalize_diagonal: bool = True
) -> float:
    """``log det X - Tr(Sigma X) - rho sum |X_ij|``; -inf when X is not positive-definite."""
    sign, logdet = np.linalg.slogdet(x)
    if sign <= 0:
        return float("-inf")
    weights = np.abs(x)
    if not penalize_diagonal:
        weights = weights - np.diag(np.diag(weights))
    return float(logdet - np.trace(sigma @ x) - rho * weights.sum())


def kkt_residual(
    x: np.ndarray, sigma: np.ndarray, rho: float, penalize_diagonal: bool = True
) -> float:
    """Smallest ``|X^{-1} - Sigma - rho G|_inf`` over valid subgradients ``G``."""
    try:
        gap = linalg.inv(x) - sigma
    except linalg.LinAlgError:
        return float("inf")
    slack = np.where(x != 0.0, np.abs(gap - rho * np.sign(x)), np.maximum(np.abs(gap) - rho, 0.0))
    if not penalize_diagonal:
        np.fill_diagonal(slack, np.abs(np.diag(gap)))
    return float(np.max(slack))


def screening_blocks(sigma: np.ndarray, rho: float) -> list[tuple[int, ...]]:
    """Connected components of ``|Sigma_ij| > rho``; the solution is block-diagonal over them."""
    return graphs.connected_clusters(graphs.dependency_graph(sigma, rho))


def _start_block(sigma: np.ndarray, rho: float, penalize_diagonal: bool) -> np.ndarray:
    """Feasible positive-definite start for one screening block."""
    if penalize_diagonal:
        start = sigma + rho * np.eye(sigma.shape[0])
    else:
        # shrink the off-diagonal just enough to stay inside the rho box
        off = sigma - np.diag(np.diag(sigma))
        weight = max(0.0, 1.0 - rho / float(np.max(np.abs(off))))
        start = np.diag(np.diag(sigma)) + weight * off
    smallest = float(linalg.eigvalsh(start)[0])
    if smallest <= 0.0:
        raise ConditioningError("covariance block is not positive semidefinite", smallest)
    return start


def _recover_precision(w: np.ndarray, blocks: list[_BlockState], n: int) -> np.ndarray:
    x = np.zeros((n, n))
    for block in blocks:
        for j in block.members:
            others = [i for i in block.members if i != j]
            beta = block.betas[j]
            denominator = w[j, j] - w[others, j] @ beta
            if not denominator > 0.0:
                raise ConditioningError(
                    "working covariance lost positive-definiteness", float(denominator)
                )
            x[j, j] = 1.0 / denominator
            x[others, j] = -beta * x[j, j]
    both = (x != 0.0) & (x.T != 0.0)
    np.fill_diagonal(both, True)
    return np.where(both, 0.5 * (x + x.T), 0.0)


def graphical_lasso(
    sigma: np.ndarray,
    rho: float,
    penalize_diagonal: bool = True,
    tol: float = GLASSO_TOL,
    max_sweeps: int = GLASSO_MAX_SWEEPS,
    labels: tuple[str, ...] = (),
) -> PrecisionEstimate:
    """Block coordinate ascent on ``log det W`` over ``|W - Sigma|_inf <= rho``.

    Each column update is a LASSO in covariance form solved by the shared coordinate-descent
    kernel; the precision matrix is read off the final regression coefficients.
    """
    sigma = symmetrize(sigma)
    n = sigma.shape[0]
    if rho <= 0:
        raise DomainError(f"rho must be positive, got {rho}")
    shift = rho if penalize_diagonal else 0.0
    diagonal = np.diag(sigma) + shift
    if np.any(diagonal <= 0):
        raise ConditioningError("covariance has a zero diagonal entry", float(diagonal.min()))

    w = np.diag(diagonal)
    blocks: list[_BlockState] = []
    singletons: list[int] = []
    for members in screening_blocks(sigma, rho):
        if len(members) == 1:
            singletons.append(members[0])
            continue
        idx = np.ix_(members, members)
        w[idx] = _start_block(sigma[idx], rho, penalize_diagonal)
        state = _BlockState(members=list(members))
        for j in members:
            others = [i for i in members if i != j]
            state.betas[j] = linalg.solve(w[np.ix_(others, others)], w[others, j], assume_a="pos")
        blocks.append(state)
    logger.debug(
        "Screening: %d singletons, blocks of sizes %s",
        len(singletons),
        [len(b.members) for b in blocks],
    )

    trace = [float(np.linalg.slogdet(w)[1])]
    x = _recover_precision(w, blocks, n)
    for j in singletons:
        x[j, j] = 1.0 / diagonal[j]
    residual = kkt_residual(x, sigma, rho, penalize_diagonal)
    sweeps = 0
    while residual > tol and sweeps < max_sweeps:
        sweeps += 1
        for block in blocks:
            for j in block.members:
                others = [i for i in block.members if i != j]
                sub = w[np.ix_(others, others)]
                result = coordinate_descent(sub, sigma[others, j], rho, start=block.betas[j])
                schur = w[j, j] - float(result.beta @ sub @ result.beta)
                if not schur > 0.0:
                    raise ConditioningError(
                        f"column {j} update left the working covariance indefinite", schur
                    )
                block.betas[j] = result.beta
                column = sub @ result.beta
                w[others, j] = column
                w[j, others] = column
        trace.append(float(np.linalg.slogdet(w)[1]))
        x = _recover_precision(w, blocks, n)
        for j in singletons:
            x[j, j] = 1.0 / diagonal[j]
        residual = kkt_residual(x, sigma, rho, penalize_diagonal)
        logger.debug("glasso sweep %d: KKT residual %.3e", sweeps, residual)

    converged = residual <= tol
    if not converged:
        logger.warning(
            "Graphical lasso stopped after %d sweeps with KKT residual %.3e", sweeps, residual
        )
    try:
        linalg.cholesky(x, lower=True)
    except linalg.LinAlgError as exc:
        raise ConditioningError("precision estimate lost positive-definiteness") from exc

    threshold = EDGE_THRESHOLD * float(np.max(np.abs(x)))
    dependency = graphs.dependency_graph(x, threshold)
    return PrecisionEstimate(
        x=x,
        rho=float(rho),
        edge_threshold=threshold,
        graph=dependency,
        clusters=tuple(graphs.connected_clusters(dependency)),
        kkt_residual=residual,
        sweeps=sweeps,
        converged=converged,
        penalize_diagonal=penalize_diagonal,
        trace=tuple(trace),
        labels=labels,
    )


def clusters(estimate: PrecisionEstimate) -> list[tuple[int, ...]]:
    return graphs.connected_clusters(estimate.graph)


def is_chordal(graph: nx.Graph) -> graphs.ChordalityReport:
    return graphs.is_chordal(graph)


def restrict_to_clusters(
    panel: TimePanel, estimate: PrecisionEstimate, min_size: int = 2
) -> list[TimePanel]:
    if estimate.n != panel.n:
        raise DomainError(f"estimate covers {estimate.n} assets, panel has {panel.n}")
    if estimate.labels and tuple(estimate.labels) != tuple(panel.labels):
        raise DomainError("estimate labels do not match panel labels")
    return [
        select_columns(panel, members)
        for members in clusters(estimate)
        if len(members) >= min_size
    ]


def _sweep_row(sigma: np.ndarray, rho: float, penalize_diagonal: bool) -> dict[str, Any]:
    estimate = graphical_lasso(sigma, rho, penalize_diagonal=penalize_diagonal)
    sizes = [len(c) for c in estimate.clusters]
    return {
        "rho": rho,
        "edges": estimate.edge_count,
        "clusters": len(sizes),
        "largest_cluster": max(sizes),
        "chordal": is_chordal(estimate.graph).chordal,
        "kkt_residual": estimate.kkt_residual,
    }


def rho_sweep(
    sigma: np.ndarray,
    rhos: Sequence[float],
    penalize_diagonal: bool = True,
    n_jobs: int = 1,
) -> list[dict[str, Any]]:
    """Edge and cluster counts per penalty, in the order the penalties were given."""
    return Parallel(n_jobs=n_jobs)(
        delayed(_sweep_row)(sigma, float(rho), penalize_diagonal) for rho in rhos
    )
