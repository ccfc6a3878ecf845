"""Cardinality-constrained generalized eigenvalue search and the sparse portfolio pipeline."""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
import pandas as pd
from joblib import Parallel, delayed, effective_n_jobs
from scipy import linalg

from sparsemr.config import ORACLE_MAX_SUPPORTS, SDP_MAX_ITER, SDP_TOL, TIE_TOL
from sparsemr.data.panel import TimePanel, make_lagged_pair
from sparsemr.exceptions import DomainError, RefusalError, SparseMRError
from sparsemr.models.covsel import graphical_lasso
from sparsemr.models.estimation import (
    EstimationMethod,
    VarModel,
    endogenous_model,
    lasso_penalty_for_sparsity,
    lasso_transition,
    ols_transition,
    pair_covariance,
)
from sparsemr.models.geneig import SymmetricPair, symmetrize, top_eig
from sparsemr.models.problem import (
    Sense,
    SolverMethod,
    SparsePortfolio,
    SparseProblem,
    make_portfolio,
    solve_on_support,
)
from sparsemr.models.sdp import sdp_relaxation
from sparsemr.trading.ou import estimate_ou

logger = logging.getLogger(__name__)


def _diagonal_ratios(oriented: SymmetricPair) -> np.ndarray:
    return np.diag(oriented.a) / np.diag(oriented.effective_b)


def _restricted_value(oriented: SymmetricPair, support: Sequence[int]) -> float:
    return top_eig(oriented.restrict(sorted(support)))[0]


def _candidate_values(
    oriented: SymmetricPair, support: Sequence[int], candidates: Sequence[int]
) -> np.ndarray:
    """Restricted top eigenvalue of every one-asset extension of ``support``, in one batch."""
    supports = np.sort(np.array([[*support, c] for c in candidates], dtype=int), axis=1)
    rows, cols = supports[:, :, None], supports[:, None, :]
    try:
        factor = np.linalg.cholesky(oriented.effective_b[rows, cols])
    except np.linalg.LinAlgError:
        return np.array([_restricted_value(oriented, s) for s in supports])
    inverse = np.linalg.inv(factor)
    whitened = inverse @ oriented.a[rows, cols] @ np.swapaxes(inverse, 1, 2)
    return np.linalg.eigvalsh(whitened)[:, -1]


def _pick(candidates: Sequence[int], values: Sequence[float], ratios: np.ndarray) -> int:
    """Best value; within TIE_TOL the larger diagonal ratio, then the lowest index."""
    best = max(values)
    close = [(c, v) for c, v in zip(candidates, values) if v >= best - TIE_TOL]
    top_ratio = max(ratios[c] for c, _ in close)
    return min(c for c, _ in close if ratios[c] >= top_ratio - TIE_TOL)


def greedy_search(
    problem: SparseProblem,
    k_max: int | None = None,
    n_jobs: int = 1,
    labels: tuple[str, ...] = (),
) -> list[SparsePortfolio]:
    """Forward selection: one portfolio per cardinality 1..k_max, supports nested."""
    k_max = problem.k if k_max is None else k_max
    if not 1 <= k_max <= problem.n:
        raise DomainError(f"k_max={k_max} outside 1..{problem.n}")
    oriented = problem.oriented()
    ratios = _diagonal_ratios(oriented)

    support = [_pick(range(problem.n), list(ratios), ratios)]
    value, weights = solve_on_support(oriented, support)
    portfolios = [make_portfolio(problem, weights, support, SolverMethod.GREEDY, labels=labels)]
    parallel = Parallel(n_jobs=n_jobs)
    workers = max(1, effective_n_jobs(n_jobs))
    for k in range(2, k_max + 1):
        candidates = [i for i in range(problem.n) if i not in support]
        chunks = [c for c in np.array_split(np.array(candidates), workers) if c.size]
        values = np.concatenate(
            parallel(delayed(_candidate_values)(oriented, support, c) for c in chunks)
        )
        support.append(_pick(candidates, values.tolist(), ratios))
        previous = value
        value, weights = solve_on_support(oriented, support)
        if value < previous - TIE_TOL * max(1.0, abs(previous)):
            logger.warning("Greedy value fell from %.12g to %.12g at k=%d", previous, value, k)
        logger.debug("Greedy k=%d: added %d, value %.10g", k, support[-1], value)
        portfolios.append(
            make_portfolio(problem, weights, support, SolverMethod.GREEDY, labels=labels)
        )
    return portfolios


def exhaustive_oracle(problem: SparseProblem, labels: tuple[str, ...] = ()) -> SparsePortfolio:
    """True optimum over every support of size ``k``."""
    count = math.comb(problem.n, problem.k)
    if count > ORACLE_MAX_SUPPORTS:
        raise RefusalError(
            f"oracle would enumerate {count} supports (limit {ORACLE_MAX_SUPPORTS})"
        )
    oriented = problem.oriented()
    best_value = -math.inf
    best_support: tuple[int, ...] = ()
    for support in itertools.combinations(range(problem.n), problem.k):
        value = _restricted_value(oriented, support)
        if value > best_value + TIE_TOL:
            best_value, best_support = value, support
    _, weights = solve_on_support(oriented, best_support)
    return make_portfolio(problem, weights, best_support, SolverMethod.ORACLE, labels=labels)


def refine_support(
    problem: SparseProblem, portfolio: SparsePortfolio, max_swaps: int | None = None
) -> SparsePortfolio:
    """Swap one member for one non-member while the best swap improves; at most ``10 n`` swaps."""
    oriented = problem.oriented()
    max_swaps = 10 * problem.n if max_swaps is None else max_swaps
    support = list(portfolio.support)
    value = _restricted_value(oriented, support)
    swaps = 0
    while swaps < max_swaps:
        outside = [i for i in range(problem.n) if i not in support]
        best = (value, None, None)
        for out_index, new in itertools.product(range(len(support)), outside):
            trial = support[:out_index] + support[out_index + 1 :] + [new]
            trial_value = _restricted_value(oriented, trial)
            if trial_value > best[0] + TIE_TOL:
                best = (trial_value, out_index, new)
        if best[1] is None:
            break
        value = best[0]
        support = sorted(support[: best[1]] + support[best[1] + 1 :] + [best[2]])
        swaps += 1
    if swaps:
        logger.info("Refinement made %d swap(s); value %.10g", swaps, value)
    _, weights = solve_on_support(oriented, support)
    return replace(
        make_portfolio(problem, weights, support, portfolio.method, labels=portfolio.labels),
        upper_bound=portfolio.upper_bound,
        certified=portfolio.certified,
    )


def solve(
    problem: SparseProblem,
    method: SolverMethod | str = SolverMethod.GREEDY,
    n_jobs: int = 1,
    labels: tuple[str, ...] = (),
    refine: bool = False,
) -> SparsePortfolio:
    method = SolverMethod(method)
    if method is SolverMethod.GREEDY:
        portfolio = greedy_search(problem, n_jobs=n_jobs, labels=labels)[-1]
    elif method is SolverMethod.SDP:
        portfolio, _ = sdp_relaxation(problem, labels=labels, tol=SDP_TOL, max_iter=SDP_MAX_ITER)
    else:
        portfolio = exhaustive_oracle(problem, labels=labels)
    if refine and method is not SolverMethod.ORACLE:
        portfolio = refine_support(problem, portfolio)
    return portfolio


@dataclass(frozen=True)
class EstimationOptions:
    """How the predictability pair is estimated before the sparse search.

    ``gamma_pen=None`` with the LASSO transition picks the penalty reaching ``zero_fraction``;
    ``rho`` replaces the sample covariance by the inverse of the graphical-lasso precision;
    ``sigma=None`` with the endogenous transition uses half the smallest covariance eigenvalue.
    """

    transition: EstimationMethod = EstimationMethod.OLS
    gamma_pen: float | None = None
    zero_fraction: float = 0.2
    rho: float | None = None
    sigma: float | None = None
    center: bool = False
    refine: bool = False
    sense: Sense = Sense.MINIMIZE
    n_jobs: int = 1


def estimate_model(panel: TimePanel, options: EstimationOptions | None = None) -> VarModel:
    options = options or EstimationOptions()
    pair = make_lagged_pair(panel, center=options.center)
    gamma: np.ndarray | None = None
    if options.rho is not None:
        covariance = pair_covariance(pair)
        precision = graphical_lasso(covariance, options.rho, labels=pair.labels)
        gamma = symmetrize(linalg.inv(precision.x))

    transition = EstimationMethod(options.transition)
    if transition is EstimationMethod.ENDOGENOUS:
        gamma = pair_covariance(pair) if gamma is None else gamma
        sigma = options.sigma
        if sigma is None:
            sigma = 0.5 * float(linalg.eigvalsh(gamma)[0])
        model = endogenous_model(gamma, sigma, labels=pair.labels)
    else:
        if transition is EstimationMethod.LASSO:
            gamma_pen = options.gamma_pen
            if gamma_pen is None:
                gamma_pen = lasso_penalty_for_sparsity(pair, options.zero_fraction, options.n_jobs)
            model = lasso_transition(pair, gamma_pen, n_jobs=options.n_jobs)
        else:
            model = ols_transition(pair)
        if gamma is not None:
            model = replace(model, gamma=gamma)
    if options.rho is not None:
        model = replace(model, flags=(*model.flags, "covsel"))
    return model


def _attach_track(
    portfolio: SparsePortfolio, panel: TimePanel
) -> SparsePortfolio:
    track = panel.values @ portfolio.weights
    try:
        lam = estimate_ou(track, panel.dt).lam
    except SparseMRError as exc:
        logger.warning("OU fit of the k=%d track failed: %s", portfolio.k, exc)
        lam = math.nan
    return replace(portfolio, nu=portfolio.value, lambda_ou=lam, track=track)


def sparse_path(
    panel: TimePanel,
    ks: Sequence[int],
    method: SolverMethod | str = SolverMethod.GREEDY,
    options: EstimationOptions | None = None,
    model: VarModel | None = None,
) -> list[SparsePortfolio]:
    """One portfolio per cardinality in ``ks``; the greedy path is built in one sweep."""
    options = options or EstimationOptions()
    method = SolverMethod(method)
    model = model or estimate_model(panel, options)
    numerator, denominator = model.predictability_pair()
    ks = sorted(set(int(k) for k in ks))
    if not ks or ks[0] < 1 or ks[-1] > panel.n:
        raise DomainError(f"cardinalities {ks} outside 1..{panel.n}")
    problem = SparseProblem(numerator, denominator, ks[-1], options.sense)
    labels = panel.labels

    if method is SolverMethod.GREEDY:
        sweep = greedy_search(problem, n_jobs=options.n_jobs, labels=labels)
        portfolios = [sweep[k - 1] for k in ks]
        if options.refine:
            portfolios = [refine_support(problem.with_k(p.k), p) for p in portfolios]
    else:
        portfolios = [
            solve(problem.with_k(k), method, options.n_jobs, labels, options.refine) for k in ks
        ]
    return [_attach_track(p, panel) for p in portfolios]


def sparse_mean_reverting(
    panel: TimePanel,
    k: int,
    method: SolverMethod | str = SolverMethod.GREEDY,
    options: EstimationOptions | None = None,
) -> SparsePortfolio:
    """Estimate the VAR model, solve the sparse problem, attach nu, lambda and the track."""
    return sparse_path(panel, [k], method, options)[0]


def path_table(portfolios: Sequence[SparsePortfolio]) -> pd.DataFrame:
    """Per-cardinality composition: support labels, weights by asset, nu, lambda, bound."""
    rows = []
    for portfolio in portfolios:
        labels = list(portfolio.labels) or [f"S{i + 1}" for i in range(portfolio.weights.size)]
        row: dict[str, object] = {
            "k": portfolio.k,
            "method": portfolio.method.value,
            "support": " ".join(portfolio.support_labels()),
            "nu": portfolio.nu if portfolio.nu is not None else portfolio.value,
            "lambda": portfolio.lambda_ou if portfolio.lambda_ou is not None else math.nan,
            "upper_bound": portfolio.objective_bound
            if portfolio.objective_bound is not None
            else math.nan,
        }
        row.update(dict(zip(labels, portfolio.weights.tolist())))
        rows.append(row)
    return pd.DataFrame(rows)
