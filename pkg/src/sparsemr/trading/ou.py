"""Ornstein-Uhlenbeck fitting and log-utility convergence-trading allocation."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import stats

from sparsemr.config import DEFAULT_DT, MIN_OU_OBS, RATIO_CLAMP
from sparsemr.exceptions import DomainError, InsufficientDataError

logger = logging.getLogger(__name__)

NOT_MEAN_REVERTING = "not_mean_reverting"
INSIGNIFICANT = "insignificant"


class TradeConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    r: float = 0.0
    f: float = Field(default=0.0, ge=0.0)
    bid_ask: float = Field(default=0.0, ge=0.0)
    w0: float = Field(default=1.0, gt=0.0)
    alpha_conf: float = Field(default=0.95, gt=0.5, lt=1.0)


@dataclass(frozen=True)
class OuParams:
    """Fit of ``dP = lam (mu - P) dt + sigma dZ`` sampled every ``dt`` years."""

    mu: float
    lam: float
    sigma: float
    dt: float = DEFAULT_DT
    n_obs: int = 0
    lambda_stderr: float = float("nan")
    # H0: AR(1) slope = 1, no mean reversion
    p_value: float = float("nan")
    # H0: AR(1) slope = 0, series is noise around its mean
    noise_p_value: float = float("nan")
    flags: tuple[str, ...] = ()

    @property
    def mean_reverting(self) -> bool:
        return self.lam > 0 and NOT_MEAN_REVERTING not in self.flags

    @property
    def stationary_sd(self) -> float:
        if self.lam <= 0:
            return float("inf")
        return self.sigma / math.sqrt(2.0 * self.lam)

    def to_dict(self) -> dict[str, Any]:
        payload = asdict(self)
        payload["flags"] = list(self.flags)
        return payload


def estimate_ou(series: np.ndarray, dt: float = DEFAULT_DT) -> OuParams:
    prices = np.asarray(series, dtype=np.float64).ravel()
    n_obs = prices.shape[0]
    if n_obs < MIN_OU_OBS:
        raise InsufficientDataError(f"OU fit needs at least {MIN_OU_OBS} points, got {n_obs}")
    if dt <= 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if np.ptp(prices) == 0.0:
        raise DomainError("OU fit of a constant series is undefined")

    mu = float(prices.mean())
    dev = prices - mu
    current, lagged = dev[1:], dev[:-1]
    flags: list[str] = []
    ratio = float(current @ lagged) / float(current @ current)
    if ratio <= 0.0:
        logger.warning("Autocorrelation ratio %.3e <= 0; clamped, series flagged", ratio)
        flags.append(NOT_MEAN_REVERTING)
        ratio = RATIO_CLAMP
    lam = -math.log(ratio) / dt
    if lam <= 0.0:
        flags.append(NOT_MEAN_REVERTING)

    phi = math.exp(-lam * dt)
    resid = current - phi * lagged
    if abs(lam * dt) < 1e-12:
        scale = 1.0 / dt
    else:
        scale = 2.0 * lam / (1.0 - phi**2)
    sigma = math.sqrt(scale * float(resid @ resid) / (n_obs - 2))

    # AR(1) slope through the origin and its standard error
    slope = float(current @ lagged) / float(lagged @ lagged)
    slope_resid = current - slope * lagged
    s2 = float(slope_resid @ slope_resid) / (n_obs - 2)
    slope_se = math.sqrt(s2 / float(lagged @ lagged))
    if slope_se > 0:
        p_value = float(2.0 * stats.t.sf(abs((slope - 1.0) / slope_se), n_obs - 2))
        noise_p_value = float(2.0 * stats.t.sf(abs(slope / slope_se), n_obs - 2))
    else:
        p_value = noise_p_value = 0.0
    lambda_stderr = slope_se / (abs(slope) * dt) if slope != 0.0 else float("inf")
    if noise_p_value > 0.05:
        flags.append(INSIGNIFICANT)

    return OuParams(
        mu=mu,
        lam=lam,
        sigma=sigma,
        dt=dt,
        n_obs=n_obs,
        lambda_stderr=lambda_stderr,
        p_value=p_value,
        noise_p_value=noise_p_value,
        flags=tuple(dict.fromkeys(flags)),
    )


def half_life(params: OuParams | float) -> float:
    lam = params.lam if isinstance(params, OuParams) else float(params)
    if lam <= 0:
        raise DomainError(f"half-life needs lambda > 0, got {lam}")
    return math.log(2.0) / lam


def log_utility_shares(params: OuParams, price: float, wealth: float, config: TradeConfig) -> float:
    if params.sigma <= 0:
        raise DomainError("log-utility allocation needs sigma > 0")
    if wealth <= 0:
        raise DomainError(f"log-utility allocation needs positive wealth, got {wealth}")
    drift = params.lam * (params.mu - price) - config.r * price
    return drift / params.sigma**2 / (1.0 + config.f) * wealth


def leverage_bound(params: OuParams, config: TradeConfig) -> float:
    if params.lam <= 0:
        raise DomainError(f"leverage bound needs lambda > 0, got {params.lam}")
    if params.sigma <= 0:
        raise DomainError("leverage bound needs sigma > 0")
    quantile = float(stats.norm.ppf(config.alpha_conf))
    return (
        quantile
        * (params.lam + config.r)
        / ((1.0 + config.f) * params.sigma * math.sqrt(2.0 * params.lam))
    )
