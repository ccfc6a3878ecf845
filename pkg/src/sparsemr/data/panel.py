from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Sequence

import numpy as np
import pandas as pd

from sparsemr.config import DEFAULT_DT
from sparsemr.exceptions import (
    DataError,
    InsufficientDataError,
    PanelOrderError,
    PanelParseError,
)

logger = logging.getLogger(__name__)

FillPolicy = Literal["drop-row", "forward-fill"]
MISSING_TOKENS = {"", "na", "nan", "null", "none"}


@dataclass
class LoadReport:
    source: str
    rows_read: int
    rows_kept: int
    dropped_rows: list[int] = field(default_factory=list)
    filled_rows: list[int] = field(default_factory=list)
    fill_policy: str = "drop-row"

    def to_dict(self) -> dict[str, object]:
        return asdict(self)

    def write_json(self, path: Path) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True), encoding="utf-8")
        return path


@dataclass(frozen=True)
class LoadOptions:
    delimiter: str = ","
    date_column: str | None = None
    fill_policy: FillPolicy = "drop-row"
    dt: float = DEFAULT_DT


@dataclass(frozen=True)
class TimePanel:
    """m x n price levels with ordered timestamps and asset labels."""

    values: np.ndarray
    timestamps: pd.Index
    labels: tuple[str, ...]
    dt: float = DEFAULT_DT
    report: LoadReport | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-D, got shape {values.shape}")
        m, n = values.shape
        if n < 1 or m < 1:
            raise InsufficientDataError(f"panel needs at least one row and column, got {m}x{n}")
        if len(self.labels) != n:
            raise DataError(f"{len(self.labels)} labels for {n} columns")
        timestamps = pd.Index(self.timestamps)
        if len(timestamps) != m:
            raise DataError(f"{len(timestamps)} timestamps for {m} rows")
        if not (timestamps.is_monotonic_increasing and timestamps.is_unique):
            raise PanelOrderError("timestamps must be strictly increasing")
        if not np.all(np.isfinite(values)):
            raise DataError("panel contains missing or non-finite values")
        if self.dt <= 0:
            raise DataError(f"dt must be positive, got {self.dt}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "timestamps", timestamps)
        object.__setattr__(self, "labels", tuple(str(label) for label in self.labels))

    @property
    def m(self) -> int:
        return int(self.values.shape[0])

    @property
    def n(self) -> int:
        return int(self.values.shape[1])

    def rows(self, start: int, stop: int) -> TimePanel:
        return TimePanel(
            values=self.values[start:stop],
            timestamps=self.timestamps[start:stop],
            labels=self.labels,
            dt=self.dt,
        )

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.labels))
        frame.insert(0, "date", self.timestamps)
        return frame


@dataclass(frozen=True)
class LaggedPair:
    """Aligned (S_t, S_{t-1}) views of a panel."""

    current: np.ndarray
    lagged: np.ndarray
    centered: bool = False
    labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        current = np.asarray(self.current, dtype=np.float64)
        lagged = np.asarray(self.lagged, dtype=np.float64)
        if current.ndim == 1:
            current = current[:, None]
        if lagged.ndim == 1:
            lagged = lagged[:, None]
        if current.shape != lagged.shape:
            raise DataError(f"current {current.shape} and lagged {lagged.shape} views differ")
        object.__setattr__(self, "current", current)
        object.__setattr__(self, "lagged", lagged)
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(f"S{i + 1}" for i in range(current.shape[1]))
            )

    @property
    def n(self) -> int:
        return int(self.current.shape[1])

    @property
    def rows(self) -> int:
        return int(self.current.shape[0])

    @property
    def differences(self) -> np.ndarray:
        return self.current - self.lagged


def _parse_index(raw: pd.Series) -> pd.Index:
    stripped = raw.str.strip()
    if stripped.str.fullmatch(r"[+-]?\d+").all():
        return pd.Index(stripped.astype(np.int64), name="date")
    try:
        return pd.DatetimeIndex(pd.to_datetime(stripped, format="ISO8601"), name="date")
    except (ValueError, TypeError) as exc:
        raise DataError(f"first column is neither ISO-8601 dates nor integers: {exc}") from exc


def _parse_column(raw: pd.Series, label: str) -> pd.Series:
    missing = raw.str.strip().str.lower().isin(MISSING_TOKENS)
    numeric = pd.to_numeric(raw.mask(missing), errors="coerce")
    bad = numeric.isna() & ~missing
    if bad.any():
        pos = int(np.flatnonzero(bad.to_numpy())[0])
        # header is file row 1
        raise PanelParseError(row=pos + 2, column=label, value=str(raw.iloc[pos]))
    # Python float parsing keeps the CSV round trip bit-exact
    return raw.mask(missing).astype(np.float64)


def load_panel(path: Path | str, options: LoadOptions | None = None) -> TimePanel:
    options = options or LoadOptions()
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"panel file not found: {path}")

    raw = pd.read_csv(path, sep=options.delimiter, dtype=str, keep_default_na=False)
    if raw.shape[1] < 2:
        raise DataError(f"{path} needs a date column and at least one asset column")
    date_column = options.date_column or raw.columns[0]
    if date_column not in raw.columns:
        raise DataError(f"date column {date_column!r} not found in {path}")

    timestamps = _parse_index(raw[date_column])
    labels = [col for col in raw.columns if col != date_column]
    frame = pd.DataFrame({label: _parse_column(raw[label], label) for label in labels})
    frame.index = timestamps

    report = LoadReport(
        source=str(path),
        rows_read=len(frame),
        rows_kept=len(frame),
        fill_policy=options.fill_policy,
    )
    gaps = frame.isna().any(axis=1).to_numpy()
    if gaps.any():
        file_rows = (np.flatnonzero(gaps) + 2).tolist()
        if options.fill_policy == "forward-fill":
            filled = frame.ffill()
            # leading gaps have nothing to carry forward
            still_missing = filled.isna().any(axis=1).to_numpy()
            report.filled_rows = [r for r, s in zip(file_rows, still_missing[gaps]) if not s]
            report.dropped_rows = (np.flatnonzero(still_missing) + 2).tolist()
            frame = filled.loc[~still_missing]
        elif options.fill_policy == "drop-row":
            report.dropped_rows = file_rows
            frame = frame.loc[~gaps]
        else:
            raise DataError(f"unknown fill policy {options.fill_policy!r}")
        logger.warning(
            "%s: %d rows dropped, %d rows forward-filled",
            path.name,
            len(report.dropped_rows),
            len(report.filled_rows),
        )
    report.rows_kept = len(frame)

    if not (frame.index.is_monotonic_increasing and frame.index.is_unique):
        raise PanelOrderError(f"{path}: timestamps are not strictly increasing")
    logger.info("Loaded %s: %d rows x %d assets", path.name, len(frame), len(labels))
    return TimePanel(
        values=frame.to_numpy(dtype=np.float64),
        timestamps=frame.index,
        labels=tuple(labels),
        dt=options.dt,
        report=report,
    )


def write_panel(panel: TimePanel, path: Path | str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = panel.to_frame()
    stamps = panel.timestamps
    if isinstance(stamps, pd.DatetimeIndex):
        daily = bool((stamps.normalize() == stamps).all())
        frame["date"] = stamps.strftime("%Y-%m-%d" if daily else "%Y-%m-%dT%H:%M:%S")
    frame.to_csv(path, index=False)
    return path


def make_lagged_pair(panel: TimePanel, center: bool = False) -> LaggedPair:
    if panel.m < 3:
        raise InsufficientDataError(f"lagged pair needs m >= 3 rows, got {panel.m}")
    values = panel.values
    means = values.mean(axis=0) if center else np.zeros(panel.n)
    return LaggedPair(
        current=values[1:] - means,
        lagged=values[:-1] - means,
        centered=center,
        labels=panel.labels,
    )


def rolling_windows(
    panel: TimePanel,
    window: int,
    step: int,
    horizon: int | None = None,
) -> list[tuple[TimePanel, TimePanel]]:
    """(in-sample, out-of-sample) pairs; out-of-sample blocks default to `window` rows."""
    if window < 3:
        raise DataError(f"window must be >= 3, got {window}")
    if step < 1:
        raise DataError(f"step must be >= 1, got {step}")
    horizon = window if horizon is None else horizon
    if horizon < 1:
        raise DataError(f"horizon must be >= 1, got {horizon}")
    pairs: list[tuple[TimePanel, TimePanel]] = []
    start = 0
    while start + window < panel.m:
        split = start + window
        pairs.append((panel.rows(start, split), panel.rows(split, min(split + horizon, panel.m))))
        start += step
    return pairs


def difference(panel: TimePanel) -> TimePanel:
    if panel.m < 2:
        raise InsufficientDataError("differencing needs at least two rows")
    return TimePanel(
        values=np.diff(panel.values, axis=0),
        timestamps=panel.timestamps[1:],
        labels=panel.labels,
        dt=panel.dt,
    )


def select_columns(panel: TimePanel, columns: Sequence[int]) -> TimePanel:
    columns = list(columns)
    if not columns:
        raise DataError("cannot select an empty set of columns")
    return TimePanel(
        values=panel.values[:, columns],
        timestamps=panel.timestamps,
        labels=tuple(panel.labels[i] for i in columns),
        dt=panel.dt,
    )
