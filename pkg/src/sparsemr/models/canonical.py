from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Any

import numpy as np
import pandas as pd
from scipy import linalg

from sparsemr.config import DEFAULT_DT
from sparsemr.data.panel import LaggedPair, TimePanel, make_lagged_pair
from sparsemr.exceptions import ConditioningError, SparseMRError
from sparsemr.models.estimation import VarModel, ols_transition
from sparsemr.models.geneig import SymmetricPair, generalized_eig, rayleigh, symmetrize
from sparsemr.trading.ou import estimate_ou, half_life

logger = logging.getLogger(__name__)

NU_SLACK = 1e-8


class Flavor(str, Enum):
    BOX_TIAO = "box_tiao"
    JOHANSEN = "johansen"


@dataclass(frozen=True)
class CanonicalBasis:
    """Portfolios in columns of ``weights``, ordered by ``predictability`` descending."""

    weights: np.ndarray
    predictability: np.ndarray
    flavor: Flavor
    portfolio_series: np.ndarray
    labels: tuple[str, ...] = ()
    model: VarModel | None = None
    trace_statistics: np.ndarray | None = None
    flags: tuple[str, ...] = ()

    @property
    def n(self) -> int:
        return int(self.weights.shape[1])

    def to_dict(self) -> dict[str, Any]:
        payload: dict[str, Any] = {
            "flavor": self.flavor.value,
            "labels": list(self.labels),
            "weights": self.weights.tolist(),
            "predictability": self.predictability.tolist(),
            "flags": list(self.flags),
        }
        if self.trace_statistics is not None:
            payload["trace_statistics"] = self.trace_statistics.tolist()
        return payload


def predictability(model: VarModel, x: np.ndarray) -> float:
    """``x'A'GammaA x / x'Gamma x``."""
    numerator, denominator = model.predictability_pair()
    return rayleigh(SymmetricPair(numerator, denominator), x)


def box_tiao(pair: LaggedPair) -> CanonicalBasis:
    model = ols_transition(pair)
    numerator, denominator = model.predictability_pair()
    result = generalized_eig(SymmetricPair(numerator, denominator))
    nu = result.eigenvalues
    flags: tuple[str, ...] = ()
    if nu.min() < -NU_SLACK or nu.max() > 1.0 + NU_SLACK:
        logger.warning(
            "Box-Tiao predictability outside [0, 1]: min %.4f, max %.4f", nu.min(), nu.max()
        )
        flags = ("nu_out_of_range",)
    return CanonicalBasis(
        weights=result.eigenvectors,
        predictability=nu,
        flavor=Flavor.BOX_TIAO,
        portfolio_series=pair.current @ result.eigenvectors,
        labels=pair.labels,
        model=model,
        flags=flags,
    )


def johansen(panel: TimePanel, center: bool = True) -> CanonicalBasis:
    """Eigenproblem of levels against differences; columns are candidate cointegrating vectors."""
    pair = make_lagged_pair(panel, center=center)
    levels = pair.lagged
    changes = pair.differences
    cross = changes.T @ levels
    try:
        factor = linalg.cho_factor(symmetrize(changes.T @ changes))
    except linalg.LinAlgError as exc:
        smallest = float(linalg.eigvalsh(symmetrize(changes.T @ changes))[0])
        raise ConditioningError("covariance of differences is singular", smallest) from exc
    numerator = symmetrize(cross.T @ linalg.cho_solve(factor, cross))
    result = generalized_eig(SymmetricPair(numerator, levels.T @ levels))
    eigenvalues = result.eigenvalues
    bounded = np.clip(eigenvalues, 0.0, 1.0 - 1e-15)
    # trace statistic for rank <= r, r = 0..n-1
    tail = np.cumsum(np.log1p(-bounded)[::-1])[::-1]
    return CanonicalBasis(
        weights=result.eigenvectors,
        predictability=eigenvalues,
        flavor=Flavor.JOHANSEN,
        portfolio_series=panel.values @ result.eigenvectors,
        labels=panel.labels,
        trace_statistics=-pair.rows * tail,
    )


def fit_portfolio_lambda(series: np.ndarray, dt: float = DEFAULT_DT) -> float:
    return estimate_ou(series, dt).lam


def summary_table(basis: CanonicalBasis, dt: float = DEFAULT_DT) -> pd.DataFrame:
    """One row per portfolio: predictability and the OU statistics of its track."""
    rows = []
    for j in range(basis.n):
        track = basis.portfolio_series[:, j]
        row: dict[str, Any] = {"portfolio": j + 1, "nu": float(basis.predictability[j])}
        try:
            params = estimate_ou(track, dt)
        except SparseMRError as exc:
            logger.warning("Portfolio %d: OU fit failed (%s)", j + 1, exc)
            params = None
        if params is None:
            row.update(
                {
                    "lambda": math.nan,
                    "lambda_stderr": math.nan,
                    "p_value": math.nan,
                    "noise_p_value": math.nan,
                    "volatility": math.nan,
                    "half_life": math.nan,
                }
            )
        else:
            row.update(
                {
                    "lambda": params.lam,
                    "lambda_stderr": params.lambda_stderr,
                    "p_value": params.p_value,
                    "noise_p_value": params.noise_p_value,
                    "volatility": params.sigma,
                    "half_life": half_life(params) if params.lam > 0 else math.nan,
                }
            )
        if basis.trace_statistics is not None:
            row["trace_statistic"] = float(basis.trace_statistics[j])
        rows.append(row)
    return pd.DataFrame(rows)


def weights_table(basis: CanonicalBasis) -> pd.DataFrame:
    labels = list(basis.labels) or [f"S{i + 1}" for i in range(basis.weights.shape[0])]
    frame = pd.DataFrame(
        basis.weights.T, columns=labels, index=pd.RangeIndex(1, basis.n + 1, name="portfolio")
    )
    return frame.reset_index()
