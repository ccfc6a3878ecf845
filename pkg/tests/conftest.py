from __future__ import annotations

from typing import Callable

import numpy as np
import pandas as pd
import pytest

from sparsemr.data.panel import TimePanel


def random_spd(rng: np.random.Generator, n: int, shift: float = 0.1) -> np.ndarray:
    g = rng.standard_normal((n, n))
    return g @ g.T + shift * n * np.eye(n)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240501)


@pytest.fixture
def spd_pair() -> Callable[[int, int], tuple[np.ndarray, np.ndarray]]:
    """Seeded (symmetric PSD numerator, SPD denominator) factory."""

    def make(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
        local = np.random.default_rng(seed)
        g = local.standard_normal((n, n))
        return g @ g.T, random_spd(local, n)

    return make


@pytest.fixture
def make_panel() -> Callable[..., TimePanel]:
    def make(values: np.ndarray, dt: float = 1.0 / 252.0) -> TimePanel:
        values = np.asarray(values, dtype=np.float64)
        if values.ndim == 1:
            values = values[:, None]
        return TimePanel(
            values=values,
            timestamps=pd.RangeIndex(values.shape[0], name="date"),
            labels=tuple(f"S{i + 1}" for i in range(values.shape[1])),
            dt=dt,
        )

    return make
