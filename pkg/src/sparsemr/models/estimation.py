from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from joblib import Parallel, delayed
from scipy import linalg

from sparsemr.config import (
    BISECTION_STEPS,
    LASSO_MAX_SWEEPS,
    LASSO_TOL,
    MIN_EIGENVALUE,
    OLS_RIDGE,
    STATIONARITY_SLACK,
)
from sparsemr.data.panel import LaggedPair, TimePanel
from sparsemr.exceptions import (
    ConditioningError,
    DomainError,
    EstimationError,
    InsufficientDataError,
)
from sparsemr.models.geneig import symmetrize

logger = logging.getLogger(__name__)


class EstimationMethod(str, Enum):
    OLS = "ols"
    LASSO = "lasso"
    ENDOGENOUS = "endogenous"


@dataclass(frozen=True)
class VarModel:
    """VAR(1) fit ``S_t = S_{t-1} A + Z_t`` with asset covariance ``gamma``.

    ``sigma_noise`` is the residual covariance, or the scalar sigma of the endogenous model.
    """

    a: np.ndarray
    gamma: np.ndarray
    sigma_noise: np.ndarray | float
    method: EstimationMethod = EstimationMethod.OLS
    penalty: float = 0.0
    flags: tuple[str, ...] = ()
    labels: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.a.shape[0])

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.a))))

    def predictability_pair(self) -> tuple[np.ndarray, np.ndarray]:
        """(A' Gamma A, Gamma): numerator and denominator of the predictability quotient."""
        return symmetrize(self.a.T @ self.gamma @ self.a), self.gamma

    def to_dict(self) -> dict[str, Any]:
        noise = self.sigma_noise
        return {
            "method": self.method.value,
            "penalty": self.penalty,
            "flags": list(self.flags),
            "labels": list(self.labels),
            "a": self.a.tolist(),
            "gamma": self.gamma.tolist(),
            "sigma_noise": noise.tolist() if isinstance(noise, np.ndarray) else float(noise),
        }


@dataclass
class DescentResult:
    beta: np.ndarray
    sweeps: int
    max_update: float
    converged: bool = field(default=True)


def soft_threshold(value: float, threshold: float) -> float:
    if value > threshold:
        return value - threshold
    if value < -threshold:
        return value + threshold
    return 0.0


def coordinate_descent(
    gram: np.ndarray,
    linear: np.ndarray,
    penalty: float,
    start: np.ndarray | None = None,
    tol: float = LASSO_TOL,
    max_sweeps: int = LASSO_MAX_SWEEPS,
) -> DescentResult:
    """Cyclic coordinate descent for ``0.5 b'Gb - c'b + penalty * |b|_1``.

    Covariance form: only the Gram matrix and the linear term are touched, so the same kernel
    serves LASSO columns and graphical-lasso column updates.
    """
    p = linear.shape[0]
    beta = np.zeros(p) if start is None else np.array(start, dtype=np.float64)
    gb = gram @ beta
    diag = np.diag(gram)
    max_update = 0.0
    for sweep in range(1, max_sweeps + 1):
        max_update = 0.0
        for j in range(p):
            if diag[j] <= 0.0:
                new = 0.0
            else:
                partial = linear[j] - gb[j] + diag[j] * beta[j]
                new = soft_threshold(partial, penalty) / diag[j]
            delta = new - beta[j]
            if delta != 0.0:
                gb += gram[:, j] * delta
                beta[j] = new
                max_update = max(max_update, abs(delta))
        if not (np.isfinite(max_update) and np.all(np.isfinite(beta))):
            raise EstimationError(
                f"coordinate descent diverged in sweep {sweep}; Gram matrix not positive-definite?"
            )
        if max_update < tol:
            return DescentResult(beta=beta, sweeps=sweep, max_update=max_update)
    return DescentResult(beta=beta, sweeps=max_sweeps, max_update=max_update, converged=False)


def sample_covariance(panel: TimePanel | np.ndarray) -> np.ndarray:
    values = panel.values if isinstance(panel, TimePanel) else np.asarray(panel, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    m = values.shape[0]
    if m < 2:
        raise InsufficientDataError(f"sample covariance needs m >= 2 rows, got {m}")
    centered = values - values.mean(axis=0)
    return symmetrize(centered.T @ centered / (m - 1))


def pair_covariance(pair: LaggedPair) -> np.ndarray:
    """Second moment of the current view about the pair's centering; the covariance if centered."""
    rows = pair.rows
    if rows < 2:
        raise InsufficientDataError(f"pair covariance needs at least 2 rows, got {rows}")
    return symmetrize(pair.current.T @ pair.current / (rows - 1))


def _residual_covariance(pair: LaggedPair, a: np.ndarray) -> np.ndarray:
    resid = pair.current - pair.lagged @ a
    return symmetrize(resid.T @ resid / pair.rows)


def _check_stationarity(model: VarModel) -> VarModel:
    radius = model.spectral_radius
    if radius < 1.0 + STATIONARITY_SLACK:
        return model
    logger.warning("Transition matrix spectral radius %.6f >= 1; process not stationary", radius)
    return VarModel(
        a=model.a,
        gamma=model.gamma,
        sigma_noise=model.sigma_noise,
        method=model.method,
        penalty=model.penalty,
        flags=(*model.flags, "nonstationary"),
        labels=model.labels,
    )


def ols_transition(pair: LaggedPair) -> VarModel:
    gram = pair.lagged.T @ pair.lagged
    cross = pair.lagged.T @ pair.current
    flags: tuple[str, ...] = ()
    if np.linalg.matrix_rank(pair.lagged) < pair.n:
        ridge = OLS_RIDGE * float(np.trace(gram))
        if ridge <= 0:
            raise EstimationError("lagged matrix is identically zero")
        logger.warning("Lagged matrix rank-deficient; ridge %.3e applied to OLS", ridge)
        gram = gram + ridge * np.eye(pair.n)
        flags = ("ridge",)
    try:
        a = linalg.solve(gram, cross, assume_a="pos")
    except linalg.LinAlgError as exc:
        raise EstimationError(f"OLS normal equations not solvable: {exc}") from exc
    model = VarModel(
        a=a,
        gamma=pair_covariance(pair),
        sigma_noise=_residual_covariance(pair, a),
        method=EstimationMethod.OLS,
        flags=flags,
        labels=pair.labels,
    )
    return _check_stationarity(model)


def _lasso_column(
    gram: np.ndarray, linear: np.ndarray, half_penalty: float, column: int
) -> np.ndarray:
    result = coordinate_descent(gram, linear, half_penalty)
    if not result.converged:
        logger.warning(
            "LASSO column %d stopped after %d sweeps (max update %.3e)",
            column,
            result.sweeps,
            result.max_update,
        )
    return result.beta


def _lasso_coefficients(pair: LaggedPair, gamma_pen: float, n_jobs: int = 1) -> np.ndarray:
    gram = pair.lagged.T @ pair.lagged
    cross = pair.lagged.T @ pair.current
    # ||y - Xb||^2 + g |b|_1 halves to the kernel's form with penalty g / 2
    columns = Parallel(n_jobs=n_jobs)(
        delayed(_lasso_column)(gram, cross[:, j], 0.5 * gamma_pen, j) for j in range(pair.n)
    )
    return np.column_stack(columns)


def lasso_transition(pair: LaggedPair, gamma_pen: float, n_jobs: int = 1) -> VarModel:
    """Column-wise ``argmin ||S_i,t - S_{t-1} x||^2 + gamma_pen |x|_1``, no 1/2 or 1/m factors."""
    if gamma_pen < 0:
        raise DomainError(f"LASSO penalty must be nonnegative, got {gamma_pen}")
    a = _lasso_coefficients(pair, gamma_pen, n_jobs=n_jobs)
    model = VarModel(
        a=a,
        gamma=pair_covariance(pair),
        sigma_noise=_residual_covariance(pair, a),
        method=EstimationMethod.LASSO,
        penalty=float(gamma_pen),
        labels=pair.labels,
    )
    return _check_stationarity(model)


def lasso_objective(pair: LaggedPair, a: np.ndarray, gamma_pen: float) -> float:
    resid = pair.current - pair.lagged @ a
    return float(np.sum(resid**2) + gamma_pen * np.sum(np.abs(a)))


def zero_fraction(a: np.ndarray) -> float:
    return float(np.mean(a == 0.0))


def lasso_penalty_for_sparsity(
    pair: LaggedPair, target_zero_fraction: float, n_jobs: int = 1
) -> float:
    if not 0.0 <= target_zero_fraction <= 1.0:
        raise DomainError(f"zero fraction must lie in [0, 1], got {target_zero_fraction}")
    if target_zero_fraction == 0.0:
        return 0.0
    cross = pair.lagged.T @ pair.current
    lo, hi = 0.0, 2.0 * float(np.max(np.abs(cross)))
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        if zero_fraction(_lasso_coefficients(pair, mid, n_jobs=n_jobs)) >= target_zero_fraction:
            hi = mid
        else:
            lo = mid
    logger.debug("Penalty %.6g reaches zero fraction %.2f", hi, target_zero_fraction)
    return hi


def _inverse_spd(gamma: np.ndarray) -> np.ndarray:
    gamma = symmetrize(gamma)
    smallest = float(linalg.eigvalsh(gamma)[0])
    if smallest <= MIN_EIGENVALUE:
        raise ConditioningError("covariance is not positive-definite", smallest)
    factor = linalg.cho_factor(gamma)
    return symmetrize(linalg.cho_solve(factor, np.eye(gamma.shape[0])))


def endogenous_factor(gamma: np.ndarray, sigma: float) -> tuple[np.ndarray, float]:
    """Upper-triangular ``A`` with ``A'A = I - sigma Gamma^{-1}`` and the sigma actually used."""
    if sigma < 0:
        raise DomainError(f"sigma must be nonnegative, got {sigma}")
    precision = _inverse_spd(gamma)
    top = float(linalg.eigvalsh(precision)[-1])
    if sigma * top >= 1.0:
        shrunk = 0.99 / top
        logger.warning("sigma %.4g exceeds the PSD limit; shrunk to %.4g", sigma, shrunk)
        sigma = shrunk
    target = symmetrize(np.eye(precision.shape[0]) - sigma * precision)
    try:
        factor = linalg.cholesky(target, lower=False)
    except linalg.LinAlgError as exc:
        raise ConditioningError(
            "I - sigma Gamma^-1 has no Cholesky factor", float(linalg.eigvalsh(target)[0])
        ) from exc
    return factor, float(sigma)


def endogenous_transition(gamma: np.ndarray, sigma: float) -> np.ndarray:
    return endogenous_factor(gamma, sigma)[0]


def endogenous_model(
    gamma: np.ndarray, sigma: float, labels: tuple[str, ...] = ()
) -> VarModel:
    a, used = endogenous_factor(gamma, sigma)
    return VarModel(
        a=a,
        gamma=symmetrize(gamma),
        sigma_noise=used,
        method=EstimationMethod.ENDOGENOUS,
        flags=("sigma_shrunk",) if used != sigma else (),
        labels=labels,
    )
