import numpy as np
import pytest

from sparsemr.data.simulations import (
    SynthConfig,
    generate_panel,
    simulate_ou,
    simulate_var,
    write_synthetic_panel,
)
from sparsemr.exceptions import DataError


def test_generate_panel_is_seed_deterministic() -> None:
    first, _ = generate_panel(SynthConfig(kind="spread", m=300, seed=3))
    second, _ = generate_panel(SynthConfig(kind="spread", m=300, seed=3))
    other, _ = generate_panel(SynthConfig(kind="spread", m=300, seed=4))
    np.testing.assert_array_equal(first.values, second.values)
    assert not np.array_equal(first.values, other.values)


def test_planted_spread_records_support() -> None:
    panel, planted = generate_panel(SynthConfig(kind="spread", m=500, n=6, pair=(4, 1)))
    assert planted["support"] == [1, 4]
    spread = panel.values[:, 1] - panel.values[:, 4]
    # the planted spread stays bounded while the walks wander
    assert np.std(spread) < 5.0
    np.testing.assert_allclose(panel.values[0, [0, 2, 3, 5]], 100.0)


def test_block_panel_plants_requested_block() -> None:
    panel, planted = generate_panel(SynthConfig(kind="block", m=2000, n=20, block_size=6, seed=1))
    block = planted["block"]
    assert len(block) == 6
    corr = np.corrcoef(panel.values, rowvar=False)
    inside = corr[np.ix_(block, block)][~np.eye(6, dtype=bool)]
    assert inside.mean() == pytest.approx(0.6, abs=0.05)


def test_block_larger_than_panel_rejected() -> None:
    with pytest.raises(DataError):
        generate_panel(SynthConfig(kind="block", n=8, block_size=14))


def test_simulate_ou_recovers_moments(rng) -> None:
    path = simulate_ou(100_000, lam=5.0, sigma=0.2, mu=1.0, dt=1.0 / 252.0, rng=rng)
    assert path.mean() == pytest.approx(1.0, abs=0.02)
    assert path.std() == pytest.approx(0.2 / np.sqrt(10.0), rel=0.1)


def test_simulate_ou_rejects_nonpositive_lambda(rng) -> None:
    with pytest.raises(DataError):
        simulate_ou(10, lam=0.0, sigma=1.0, mu=0.0, dt=0.1, rng=rng)


def test_simulate_var_is_stationary_with_stable_coefficients(rng) -> None:
    values = simulate_var([0.5 * np.eye(2)], 20_000, rng)
    assert values.shape == (20_000, 2)
    # stationary variance of x_t = 0.5 x_{t-1} + e_t is 1 / (1 - 0.25)
    np.testing.assert_allclose(values.var(axis=0), 4.0 / 3.0, rtol=0.05)


def test_fixed_width_fixtures() -> None:
    coint, planted = generate_panel(SynthConfig(kind="coint", m=200))
    assert coint.n == 2 and planted["vector"] == [1.0, -1.0]
    ar1, planted = generate_panel(SynthConfig(kind="ar1", m=200))
    assert ar1.n == 2 and planted["predictability"] == pytest.approx([0.81, 0.01])
    var, _ = generate_panel(SynthConfig(kind="var", m=200))
    assert var.n == 4


def test_write_synthetic_panel_uses_output_dir(tmp_path, monkeypatch) -> None:
    monkeypatch.setenv("SPARSEMR_OUTPUT_DIR", str(tmp_path))
    path = write_synthetic_panel(config=SynthConfig(kind="ar1", m=50, seed=9))
    assert path == tmp_path / "synth" / "ar1_9.csv"
    assert path.read_text(encoding="utf-8").startswith("date,S1,S2\n")
