from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from sparsemr.config import DEFAULT_DT, DEFAULT_HORIZON, DEFAULT_STEP, DEFAULT_WINDOW
from sparsemr.exceptions import DataError
from sparsemr.models.canonical import Flavor
from sparsemr.models.estimation import EstimationMethod
from sparsemr.models.problem import Sense, SolverMethod
from sparsemr.models.sparse import EstimationOptions
from sparsemr.trading.ou import TradeConfig

Command = Literal["decompose", "sparse", "covsel", "backtest", "synth"]


class EstimationConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    transition: EstimationMethod = EstimationMethod.OLS
    gamma: float | None = Field(default=None, ge=0.0)
    zero_fraction: float = Field(default=0.2, ge=0.0, le=1.0)
    rho: float | None = Field(default=None, gt=0.0)
    sigma: float | None = Field(default=None, ge=0.0)
    center: bool = False
    refine: bool = False

    def options(self, sense: Sense, n_jobs: int = 1) -> EstimationOptions:
        return EstimationOptions(
            transition=self.transition,
            gamma_pen=self.gamma,
            zero_fraction=self.zero_fraction,
            rho=self.rho,
            sigma=self.sigma,
            center=self.center,
            refine=self.refine,
            sense=sense,
            n_jobs=n_jobs,
        )


class SynthSettings(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["var", "spread", "block", "coint", "ar1"] = "spread"
    m: int = Field(default=2000, ge=10)
    # spread and block only; the other fixtures have a fixed width
    n: int | None = Field(default=None, ge=2)
    block_size: int = Field(default=14, ge=2)


class RunConfig(BaseModel):
    """Everything a run depends on; ``run_config.json`` re-executes it."""

    model_config = ConfigDict(extra="forbid")

    command: Command
    input: str | None = None
    out: str | None = None
    dt: float = Field(default=DEFAULT_DT, gt=0.0)
    window: int | None = Field(default=None, ge=3)
    step: int | None = Field(default=None, ge=1)
    horizon: int | None = Field(default=None, ge=1)
    k: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    method: SolverMethod = SolverMethod.GREEDY
    sense: Sense = Sense.MINIMIZE
    flavor: Flavor = Flavor.BOX_TIAO
    difference: bool = False
    fill_policy: Literal["drop-row", "forward-fill"] = "drop-row"
    estimation: EstimationConfig = Field(default_factory=EstimationConfig)
    rho_sweep: list[float] = Field(default_factory=list)
    trade: TradeConfig = Field(default_factory=TradeConfig)
    seed: int | None = None
    compare: bool = False
    timing: list[int] = Field(default_factory=list)
    cluster_search: bool = False
    report: bool = False
    save_model: bool = False
    n_jobs: int = 1
    synth: SynthSettings = Field(default_factory=SynthSettings)

    @field_validator("k")
    @classmethod
    def _positive_sorted(cls, value: list[int]) -> list[int]:
        if not value or min(value) < 1:
            raise ValueError("cardinalities must be positive integers")
        return sorted(set(value))

    @field_validator("rho_sweep")
    @classmethod
    def _positive_rhos(cls, value: list[float]) -> list[float]:
        if any(r <= 0 for r in value):
            raise ValueError("rho values must be positive")
        return value

    @model_validator(mode="after")
    def _required_inputs(self) -> RunConfig:
        if self.command != "synth" and not self.input:
            raise ValueError(f"{self.command} needs --input")
        stochastic = self.command == "synth" or bool(self.timing)
        if stochastic and self.seed is None:
            raise ValueError("stochastic runs need --seed")
        return self

    def out_dir(self, root: Path) -> Path:
        return Path(self.out) if self.out else root / self.command

    def windowing(self) -> tuple[int, int, int]:
        """(window, step, horizon), with the convergence-trading defaults filled in."""
        return (
            self.window or DEFAULT_WINDOW,
            self.step or DEFAULT_STEP,
            self.horizon or DEFAULT_HORIZON,
        )

    def estimation_options(self) -> EstimationOptions:
        return self.estimation.options(self.sense, self.n_jobs)


def parse_cardinalities(text: str) -> list[int]:
    """``"3"``, ``"1-8"`` or ``"2,4,6"`` (ranges and lists may be mixed)."""
    values: list[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if "-" in part:
                lo, hi = (int(p) for p in part.split("-", 1))
                values.extend(range(lo, hi + 1))
            elif part:
                values.append(int(part))
    except ValueError as exc:
        raise DataError(f"cannot parse cardinalities {text!r}") from exc
    return values


def _merge(base: dict[str, Any], overrides: dict[str, Any]) -> dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config_file(path: Path | str) -> dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config file not found: {path}")
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(payload, dict):
        raise DataError(f"{path} must hold a JSON object")
    return payload


def resolve_config(overrides: dict[str, Any], config_path: Path | str | None = None) -> RunConfig:
    """Flags over the config file over defaults; ``None`` overrides are ignored."""

    def _drop_none(payload: dict[str, Any]) -> dict[str, Any]:
        cleaned = {}
        for key, value in payload.items():
            if isinstance(value, dict):
                value = _drop_none(value)
                if not value:
                    continue
            if value is not None:
                cleaned[key] = value
        return cleaned

    base = load_config_file(config_path) if config_path else {}
    return RunConfig.model_validate(_merge(base, _drop_none(overrides)))
