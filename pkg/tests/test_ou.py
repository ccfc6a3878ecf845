import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy import stats

from sparsemr.config import DEFAULT_DT
from sparsemr.data.simulations import simulate_ou
from sparsemr.exceptions import DomainError, InsufficientDataError
from sparsemr.trading.ou import (
    INSIGNIFICANT,
    NOT_MEAN_REVERTING,
    OuParams,
    TradeConfig,
    estimate_ou,
    half_life,
    leverage_bound,
    log_utility_shares,
)

PARAMS = OuParams(mu=1.0, lam=5.0, sigma=0.2)


def test_planted_autocorrelation_ratio_gives_exact_lambda() -> None:
    series = np.array([0.0, 1.0, 1.0, 0.0, -1.0, -1.0] * 2)
    params = estimate_ou(series)
    assert params.mu == pytest.approx(0.0, abs=1e-15)
    assert params.lam == pytest.approx(252.0 * math.log(2.0), rel=1e-12)
    assert params.n_obs == 12


def test_half_life_values() -> None:
    assert 0.0029 <= half_life(238.11) <= 0.00292
    assert half_life(0.58) == pytest.approx(math.log(2.0) / 0.58)
    assert half_life(PARAMS) == pytest.approx(math.log(2.0) / 5.0)
    with pytest.raises(DomainError):
        half_life(0.0)


def test_fit_recovers_simulated_parameters(rng) -> None:
    series = simulate_ou(50_000, lam=20.0, sigma=1.0, mu=1.0, dt=DEFAULT_DT, rng=rng)
    params = estimate_ou(series)
    assert params.lam == pytest.approx(20.0, rel=0.1)
    assert params.sigma == pytest.approx(1.0, rel=0.05)
    assert params.mu == pytest.approx(1.0, abs=0.05)
    assert params.mean_reverting
    assert params.flags == ()
    assert params.p_value < 1e-6
    assert params.stationary_sd == pytest.approx(1.0 / math.sqrt(40.0), rel=0.1)


def test_fit_of_slow_reversion_over_many_seeds() -> None:
    fits = []
    for seed in range(5):
        rng = np.random.default_rng(seed)
        series = simulate_ou(50_000, lam=5.0, sigma=0.2, mu=1.0, dt=DEFAULT_DT, rng=rng)
        fits.append(estimate_ou(series))
    lam = float(np.median([p.lam for p in fits]))
    assert abs(lam - 5.0) <= 0.5
    assert half_life(lam) == pytest.approx(math.log(2.0) / 5.0, rel=0.15)
    for params in fits:
        assert abs(params.sigma - 0.2) <= 0.01
        assert abs(params.mu - 1.0) <= 0.02


def test_lambda_error_shrinks_with_sample_size() -> None:
    medians = []
    for n_obs in (1_000, 10_000, 100_000):
        errors = []
        for seed in range(20):
            rng = np.random.default_rng(1000 + seed)
            series = simulate_ou(n_obs, lam=5.0, sigma=0.2, mu=1.0, dt=DEFAULT_DT, rng=rng)
            errors.append(abs(estimate_ou(series).lam - 5.0))
        medians.append(float(np.median(errors)))
    assert medians[0] > medians[1] > medians[2]


def test_white_noise_reverts_instantly_with_wide_error(rng) -> None:
    params = estimate_ou(rng.standard_normal(500))
    assert params.lam >= 100.0
    assert params.lambda_stderr > 50.0


def test_negative_autocorrelation_is_clamped_and_flagged() -> None:
    series = np.array([1.0, -1.0] * 10)
    params = estimate_ou(series)
    assert NOT_MEAN_REVERTING in params.flags
    assert params.lam == pytest.approx(-math.log(1e-6) / DEFAULT_DT)
    assert not params.mean_reverting


def test_fit_input_errors() -> None:
    with pytest.raises(InsufficientDataError):
        estimate_ou(np.arange(9.0))
    with pytest.raises(DomainError):
        estimate_ou(np.arange(20.0), dt=0.0)
    with pytest.raises(DomainError):
        estimate_ou(np.ones(20))


def test_params_to_dict_lists_flags() -> None:
    payload = OuParams(mu=0.0, lam=1.0, sigma=1.0, flags=(INSIGNIFICANT,)).to_dict()
    assert payload["flags"] == [INSIGNIFICANT]
    assert payload["dt"] == DEFAULT_DT


def test_log_utility_shares() -> None:
    assert log_utility_shares(PARAMS, 0.9, 2.0, TradeConfig()) == pytest.approx(25.0)
    assert log_utility_shares(PARAMS, 0.9, 2.0, TradeConfig(f=1.0)) == pytest.approx(12.5)
    assert log_utility_shares(PARAMS, 0.9, 2.0, TradeConfig(r=0.05)) == pytest.approx(22.75)
    assert log_utility_shares(PARAMS, 1.0, 2.0, TradeConfig()) == 0.0
    with pytest.raises(DomainError):
        log_utility_shares(PARAMS, 0.9, 0.0, TradeConfig())


def test_leverage_bound() -> None:
    expected = stats.norm.ppf(0.95) * 5.0 / (0.2 * math.sqrt(10.0))
    assert leverage_bound(PARAMS, TradeConfig()) == pytest.approx(expected)
    with pytest.raises(DomainError):
        leverage_bound(OuParams(mu=0.0, lam=0.0, sigma=1.0), TradeConfig())


def test_trade_config_validation() -> None:
    with pytest.raises(ValidationError):
        TradeConfig(bid_ask=-0.01)
    with pytest.raises(ValidationError):
        TradeConfig(w0=0.0)
    with pytest.raises(ValidationError):
        TradeConfig(alpha_conf=0.4)
    with pytest.raises(ValidationError):
        TradeConfig(leverage=2.0)
    config = TradeConfig(r=0.01)
    with pytest.raises(ValidationError):
        config.r = 0.02
