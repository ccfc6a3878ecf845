from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import pandas as pd
from scipy.signal import lfilter

from sparsemr.config import DEFAULT_DT, get_output_dir
from sparsemr.data.panel import TimePanel, write_panel
from sparsemr.exceptions import DataError

logger = logging.getLogger(__name__)

SynthKind = Literal["var", "spread", "block", "coint", "ar1"]
START_DATE = "2010-01-04"

# stable lag-1 / lag-2 coefficients for the 4-asset VAR(2) fixture
VAR2_COEFS = (
    np.array(
        [
            [0.50, 0.10, 0.00, 0.00],
            [0.00, 0.40, 0.10, 0.00],
            [0.05, 0.00, 0.30, 0.10],
            [0.00, 0.00, 0.00, 0.60],
        ]
    ),
    np.array(
        [
            [0.20, 0.00, 0.00, 0.00],
            [0.00, 0.10, 0.00, 0.00],
            [0.00, 0.00, 0.20, 0.00],
            [0.00, 0.05, 0.00, 0.10],
        ]
    ),
)


@dataclass
class SynthConfig:
    kind: SynthKind = "spread"
    m: int = 2000
    n: int = 8
    seed: int = 0
    dt: float = DEFAULT_DT
    # planted OU spread
    pair: tuple[int, int] = (1, 4)
    spread_lambda: float = 10.0
    spread_sigma: float = 5.0
    walk_sigma: float = 1.0
    # price level the walks start from
    start_level: float = 100.0
    # cointegrated pair
    coint_lambda: float = 50.0
    coint_sigma: float = 2.0
    # planted block covariance
    block_size: int = 14
    block_corr: float = 0.6
    # independent AR(1) coefficients
    ar_coefs: tuple[float, ...] = field(default_factory=lambda: (0.9, 0.1))


def _panel(values: np.ndarray, dt: float, prefix: str = "S") -> TimePanel:
    m, n = values.shape
    return TimePanel(
        values=values,
        timestamps=pd.bdate_range(START_DATE, periods=m, name="date"),
        labels=tuple(f"{prefix}{i + 1}" for i in range(n)),
        dt=dt,
    )


def simulate_var(
    coefs: Sequence[np.ndarray],
    m: int,
    rng: np.random.Generator,
    noise_cov: np.ndarray | None = None,
    burn_in: int = 200,
) -> np.ndarray:
    """Row-vector VAR(p): S_t = sum_i S_{t-i} A_i + Z_t."""
    coefs = [np.asarray(a, dtype=np.float64) for a in coefs]
    n = coefs[0].shape[0]
    p = len(coefs)
    chol = np.linalg.cholesky(noise_cov) if noise_cov is not None else np.eye(n)
    total = m + burn_in
    noise = rng.standard_normal((total, n)) @ chol.T
    out = np.zeros((total + p, n))
    for t in range(p, total + p):
        row = noise[t - p].copy()
        for lag, a in enumerate(coefs, start=1):
            row += out[t - lag] @ a
        out[t] = row
    return out[p + burn_in :]


def simulate_ou(
    m: int,
    lam: float,
    sigma: float,
    mu: float,
    dt: float,
    rng: np.random.Generator,
    start: float | None = None,
) -> np.ndarray:
    """Exact discretization of dP = lam (mu - P) dt + sigma dZ."""
    if lam <= 0 or sigma < 0:
        raise DataError(f"OU needs lam > 0 and sigma >= 0, got lam={lam}, sigma={sigma}")
    phi = np.exp(-lam * dt)
    step_sd = sigma * np.sqrt((1.0 - phi**2) / (2.0 * lam))
    if start is None:
        start = mu + sigma / np.sqrt(2.0 * lam) * rng.standard_normal()
    shocks = step_sd * rng.standard_normal(m)
    shocks[0] = 0.0
    deviations = lfilter([1.0], [1.0, -phi], shocks)
    deviations = deviations + (start - mu) * phi ** np.arange(m)
    return mu + deviations


def random_walks(m: int, n: int, sigma: float, dt: float, rng: np.random.Generator) -> np.ndarray:
    steps = sigma * np.sqrt(dt) * rng.standard_normal((m, n))
    steps[0] = 0.0
    return np.cumsum(steps, axis=0)


def planted_spread_panel(config: SynthConfig, rng: np.random.Generator) -> TimePanel:
    """Random walks where S[pair[1]] - S[pair[0]] is an OU spread."""
    i, j = config.pair
    if not (0 <= i < config.n and 0 <= j < config.n and i != j):
        raise DataError(f"pair {config.pair} invalid for n={config.n}")
    walks = random_walks(config.m, config.n, config.walk_sigma, config.dt, rng)
    values = config.start_level + walks
    spread = simulate_ou(
        config.m, config.spread_lambda, config.spread_sigma, 0.0, config.dt, rng
    )
    values[:, j] = values[:, i] + spread
    return _panel(values, config.dt)


def block_covariance_panel(
    config: SynthConfig, rng: np.random.Generator
) -> tuple[TimePanel, tuple[int, ...]]:
    """Gaussian rows with one equicorrelated block; returns the planted members too."""
    if not 2 <= config.block_size <= config.n:
        raise DataError(f"block size {config.block_size} invalid for n={config.n}")
    block = tuple(sorted(int(i) for i in rng.choice(config.n, config.block_size, replace=False)))
    cov = np.eye(config.n)
    idx = np.ix_(block, block)
    cov[idx] = config.block_corr
    cov[list(block), list(block)] = 1.0
    values = rng.multivariate_normal(np.zeros(config.n), cov, size=config.m, method="cholesky")
    return _panel(values, config.dt), block


def cointegrated_pair_panel(config: SynthConfig, rng: np.random.Generator) -> TimePanel:
    """S2 = S1 + stationary AR(1) noise, with S1 a random walk."""
    walk = random_walks(config.m, 1, config.walk_sigma, config.dt, rng)[:, 0]
    noise = simulate_ou(config.m, config.coint_lambda, config.coint_sigma, 0.0, config.dt, rng)
    return _panel(np.column_stack([walk, walk + noise]), config.dt)


def ar1_panel(config: SynthConfig, rng: np.random.Generator) -> TimePanel:
    columns = []
    for coef in config.ar_coefs:
        column = lfilter([1.0], [1.0, -coef], rng.standard_normal(config.m))
        columns.append(column)
    return _panel(np.column_stack(columns), config.dt)


def var_panel(config: SynthConfig, rng: np.random.Generator) -> TimePanel:
    return _panel(simulate_var(VAR2_COEFS, config.m, rng), config.dt)


def generate_panel(config: SynthConfig | None = None) -> tuple[TimePanel, dict[str, object]]:
    """Build the configured fixture; the dict records what was planted."""
    config = config or SynthConfig()
    rng = np.random.default_rng(config.seed)
    planted: dict[str, object] = {"kind": config.kind, "seed": config.seed}
    if config.kind == "spread":
        panel = planted_spread_panel(config, rng)
        planted["support"] = sorted(config.pair)
    elif config.kind == "block":
        panel, block = block_covariance_panel(config, rng)
        planted["block"] = list(block)
    elif config.kind == "coint":
        panel = cointegrated_pair_panel(config, rng)
        planted["vector"] = [1.0, -1.0]
    elif config.kind == "ar1":
        panel = ar1_panel(config, rng)
        planted["predictability"] = [c**2 for c in config.ar_coefs]
    elif config.kind == "var":
        panel = var_panel(config, rng)
        planted["coefs"] = [a.tolist() for a in VAR2_COEFS]
    else:
        raise DataError(f"unknown synthetic kind {config.kind!r}")
    logger.info("Generated %s panel: %d x %d (seed %d)", config.kind, panel.m, panel.n, config.seed)
    return panel, planted


def write_synthetic_panel(path: Path | None = None, config: SynthConfig | None = None) -> Path:
    config = config or SynthConfig()
    path = path or (get_output_dir() / "synth" / f"{config.kind}_{config.seed}.csv")
    panel, _ = generate_panel(config)
    return write_panel(panel, path)
