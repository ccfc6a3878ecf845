import numpy as np
import pytest

from sparsemr.data.panel import make_lagged_pair
from sparsemr.data.simulations import SynthConfig, generate_panel, simulate_ou
from sparsemr.models.canonical import (
    Flavor,
    box_tiao,
    fit_portfolio_lambda,
    johansen,
    predictability,
    summary_table,
    weights_table,
)


def _cosine(u: np.ndarray, v: np.ndarray) -> float:
    return abs(float(u @ v)) / (np.linalg.norm(u) * np.linalg.norm(v))


def test_box_tiao_recovers_independent_ar1_predictability() -> None:
    panel, planted = generate_panel(SynthConfig(kind="ar1", m=50_000, seed=0))
    basis = box_tiao(make_lagged_pair(panel, center=True))
    np.testing.assert_allclose(basis.predictability, planted["predictability"], atol=0.05)
    assert _cosine(basis.weights[:, 0], np.array([1.0, 0.0])) >= 0.95
    assert _cosine(basis.weights[:, 1], np.array([0.0, 1.0])) >= 0.95
    assert basis.flavor is Flavor.BOX_TIAO


def test_box_tiao_basis_is_gamma_orthonormal(rng, make_panel) -> None:
    panel = make_panel(np.cumsum(rng.standard_normal((400, 4)), axis=0))
    basis = box_tiao(make_lagged_pair(panel, center=True))
    gamma = basis.model.gamma
    np.testing.assert_allclose(basis.weights.T @ gamma @ basis.weights, np.eye(4), atol=1e-8)
    assert np.all(np.diff(basis.predictability) <= 0)
    for j in range(4):
        assert predictability(basis.model, basis.weights[:, j]) == pytest.approx(
            basis.predictability[j], rel=1e-8
        )


def test_box_tiao_tracks_are_current_view_projections(rng, make_panel) -> None:
    panel = make_panel(np.cumsum(rng.standard_normal((100, 3)), axis=0))
    pair = make_lagged_pair(panel, center=True)
    basis = box_tiao(pair)
    np.testing.assert_allclose(basis.portfolio_series, pair.current @ basis.weights)


def test_johansen_finds_cointegrating_vector() -> None:
    panel, planted = generate_panel(SynthConfig(kind="coint", m=2000, seed=2))
    basis = johansen(panel)
    assert basis.flavor is Flavor.JOHANSEN
    assert _cosine(basis.weights[:, 0], np.array(planted["vector"])) >= 0.95
    assert basis.predictability[0] > basis.predictability[1]
    stats = basis.trace_statistics
    assert stats.shape == (2,)
    assert stats[0] > stats[1] >= 0.0


def test_summary_table_columns(rng, make_panel) -> None:
    panel = make_panel(np.cumsum(rng.standard_normal((300, 3)), axis=0))
    basis = box_tiao(make_lagged_pair(panel, center=True))
    table = summary_table(basis, panel.dt)
    assert list(table["portfolio"]) == [1, 2, 3]
    for column in ("nu", "lambda", "lambda_stderr", "p_value", "volatility", "half_life"):
        assert column in table.columns
    assert "trace_statistic" not in table.columns
    np.testing.assert_allclose(table["nu"], basis.predictability)


def test_johansen_summary_reports_trace_statistic() -> None:
    panel, _ = generate_panel(SynthConfig(kind="coint", m=500, seed=3))
    table = summary_table(johansen(panel), panel.dt)
    assert "trace_statistic" in table.columns


def test_weights_table_has_one_row_per_portfolio(rng, make_panel) -> None:
    panel = make_panel(np.cumsum(rng.standard_normal((80, 3)), axis=0))
    table = weights_table(box_tiao(make_lagged_pair(panel)))
    assert list(table.columns) == ["portfolio", "S1", "S2", "S3"]
    assert len(table) == 3


def test_fit_portfolio_lambda_of_mean_reverting_track(rng) -> None:
    track = simulate_ou(5000, lam=20.0, sigma=1.0, mu=0.0, dt=1.0 / 252.0, rng=rng)
    assert fit_portfolio_lambda(track) == pytest.approx(20.0, rel=0.35)


def test_box_tiao_is_invariant_under_asset_mixing(rng, make_panel) -> None:
    values = np.cumsum(rng.standard_normal((400, 4)), axis=0)
    local = np.random.default_rng(5)
    mixing = (np.eye(4) + 0.3 * local.standard_normal((4, 4)))[[2, 0, 3, 1]]
    basis = box_tiao(make_lagged_pair(make_panel(values)))
    mixed = box_tiao(make_lagged_pair(make_panel(values @ mixing)))
    np.testing.assert_allclose(mixed.predictability, basis.predictability, rtol=1e-7)
    np.testing.assert_allclose(np.abs(mixing @ mixed.weights), np.abs(basis.weights), atol=1e-6)


def test_johansen_of_random_walk_has_no_cointegration(rng, make_panel) -> None:
    panel = make_panel(np.cumsum(rng.standard_normal((20_000, 2)), axis=0))
    basis = johansen(panel)
    assert np.all(basis.predictability <= 0.01)
    assert np.all(basis.predictability >= -1e-10)


def test_box_tiao_of_white_noise_is_unpredictable(rng, make_panel) -> None:
    basis = box_tiao(make_lagged_pair(make_panel(rng.standard_normal(10_000))))
    assert basis.n == 1
    assert 0.0 <= basis.predictability[0] <= 0.05
