from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np
import pandas as pd

from sparsemr.config import DEFAULT_DT
from sparsemr.exceptions import DataError, InsufficientDataError, SparseMRError
from sparsemr.trading.ou import OuParams, TradeConfig, estimate_ou, log_utility_shares

logger = logging.getLogger(__name__)

BANKRUPT = "bankrupt"
ZERO_VARIANCE = "zero_variance"
UNTRADEABLE = "untradeable"


@dataclass(frozen=True)
class RefitSchedule:
    """Re-estimate OU parameters on the trailing ``window`` prices every ``every`` steps."""

    window: int
    every: int = 1
    dt: float = DEFAULT_DT

    def __post_init__(self) -> None:
        if self.window < 10 or self.every < 1:
            raise DataError(f"refit needs window >= 10 and every >= 1, got {self}")


@dataclass(frozen=True)
class BacktestResult:
    wealth: np.ndarray
    shares: np.ndarray
    sharpe: float
    turnover: float
    cost_paid: float
    max_leverage: float
    flags: tuple[str, ...] = ()

    @property
    def returns(self) -> np.ndarray:
        return np.diff(self.wealth) / self.wealth[:-1]

    @property
    def bankrupt(self) -> bool:
        return BANKRUPT in self.flags

    def to_frame(self) -> pd.DataFrame:
        shares = np.append(self.shares, np.nan)
        return pd.DataFrame(
            {"step": np.arange(self.wealth.size), "wealth": self.wealth, "shares": shares}
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "sharpe": self.sharpe,
            "turnover": self.turnover,
            "cost_paid": self.cost_paid,
            "max_leverage": self.max_leverage,
            "final_wealth": float(self.wealth[-1]),
            "steps": int(self.shares.size),
            "flags": list(self.flags),
        }


def turnover(shares: np.ndarray) -> float:
    return float(np.sum(np.abs(np.diff(shares, prepend=0.0))))


def sharpe_ratio(wealth: np.ndarray, r: float, dt: float) -> tuple[float, bool]:
    """Annualized Sharpe of per-step wealth returns in excess of ``r``; flag when degenerate."""
    if wealth.size < 3:
        return 0.0, True
    returns = np.diff(wealth) / wealth[:-1]
    spread = float(np.std(returns, ddof=1))
    if not math.isfinite(spread) or spread <= 1e-15 * max(1.0, float(np.max(np.abs(returns)))):
        return 0.0, True
    return float(np.mean(returns - r * dt) / spread * math.sqrt(1.0 / dt)), False


def _refit(
    track: np.ndarray, t: int, schedule: RefitSchedule, last: OuParams | None
) -> OuParams | None:
    if t + 1 < schedule.window:
        return None
    if last is not None and (t + 1 - schedule.window) % schedule.every != 0:
        return last
    try:
        return estimate_ou(track[t + 1 - schedule.window : t + 1], schedule.dt)
    except SparseMRError as exc:
        logger.debug("Refit at step %d skipped: %s", t, exc)
        return None


def backtest(
    track: np.ndarray, params: OuParams | RefitSchedule, config: TradeConfig
) -> BacktestResult:
    """Discrete log-utility convergence trade with half-spread costs on each position change."""
    prices = np.asarray(track, dtype=np.float64).ravel()
    steps = prices.size - 1
    if steps < 1:
        raise InsufficientDataError("backtest needs a track of at least two prices")
    dt = params.dt

    wealth = np.empty(steps + 1)
    wealth[0] = config.w0
    shares = np.zeros(steps)
    flags: list[str] = []
    held = 0.0
    current = params if isinstance(params, OuParams) else None
    if current is not None and not current.mean_reverting:
        logger.warning("OU fit is not mean reverting; backtest holds no position")
        flags.append(UNTRADEABLE)

    for t in range(steps):
        if isinstance(params, RefitSchedule):
            current = _refit(prices, t, params, current)
        if current is not None and current.mean_reverting and current.sigma > 0:
            position = log_utility_shares(current, prices[t], wealth[t], config)
        else:
            position = 0.0
        cost = 0.5 * config.bid_ask * abs(position - held)
        wealth[t + 1] = (
            wealth[t]
            + position * (prices[t + 1] - prices[t])
            + (wealth[t] - position * prices[t]) * config.r * dt
            - cost
        )
        shares[t] = position
        held = position
        if wealth[t + 1] <= 0.0:
            logger.warning("Wealth exhausted at step %d; backtest halted", t + 1)
            flags.append(BANKRUPT)
            wealth = wealth[: t + 2]
            shares = shares[: t + 1]
            break

    sharpe, degenerate = sharpe_ratio(wealth, config.r, dt)
    if degenerate:
        flags.append(ZERO_VARIANCE)
    traded = turnover(shares)
    leverage = np.abs(shares * prices[: shares.size]) / wealth[: shares.size]
    return BacktestResult(
        wealth=wealth,
        shares=shares,
        sharpe=sharpe,
        turnover=traded,
        cost_paid=0.5 * config.bid_ask * traded,
        max_leverage=float(np.max(leverage)) if leverage.size else 0.0,
        flags=tuple(flags),
    )
