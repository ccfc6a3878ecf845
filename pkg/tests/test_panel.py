from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from sparsemr.data.panel import (
    LoadOptions,
    difference,
    load_panel,
    make_lagged_pair,
    rolling_windows,
    select_columns,
    write_panel,
)
from sparsemr.exceptions import DataError, InsufficientDataError, PanelOrderError, PanelParseError


def _write(tmp_path: Path, text: str) -> Path:
    path = tmp_path / "panel.csv"
    path.write_text(text, encoding="utf-8")
    return path


def test_load_panel_reads_dates_labels_and_values(tmp_path: Path) -> None:
    path = _write(tmp_path, "date,A,B\n2020-01-02,1.5,2\n2020-01-03,1.25,3\n2020-01-06,1,4\n")
    panel = load_panel(path)
    assert panel.labels == ("A", "B")
    assert panel.m == 3 and panel.n == 2
    assert isinstance(panel.timestamps, pd.DatetimeIndex)
    np.testing.assert_array_equal(panel.values[:, 0], [1.5, 1.25, 1.0])
    assert panel.report is not None and panel.report.rows_kept == 3


def test_load_panel_accepts_integer_index(tmp_path: Path) -> None:
    panel = load_panel(_write(tmp_path, "t,A\n1,1\n2,2\n5,3\n"))
    assert list(panel.timestamps) == [1, 2, 5]


def test_unparseable_cell_names_row_and_column(tmp_path: Path) -> None:
    path = _write(tmp_path, "date,A,B\n2020-01-02,1,2\n2020-01-03,abc,3\n")
    with pytest.raises(PanelParseError) as info:
        load_panel(path)
    assert info.value.row == 3
    assert info.value.column == "A"


def test_decreasing_timestamps_rejected(tmp_path: Path) -> None:
    path = _write(tmp_path, "date,A\n2020-01-03,1\n2020-01-02,2\n")
    with pytest.raises(PanelOrderError):
        load_panel(path)


def test_missing_file_raises_file_not_found(tmp_path: Path) -> None:
    with pytest.raises(FileNotFoundError):
        load_panel(tmp_path / "absent.csv")


def test_drop_row_policy_records_dropped_rows(tmp_path: Path) -> None:
    text = "date,A,B\n2020-01-02,1,2\n2020-01-03,,3\n2020-01-06,2,NA\n2020-01-07,3,4\n"
    path = _write(tmp_path, text)
    panel = load_panel(path)
    assert panel.m == 2
    assert panel.report.dropped_rows == [3, 4]


def test_forward_fill_policy_keeps_rows(tmp_path: Path) -> None:
    path = _write(tmp_path, "date,A,B\n2020-01-02,,2\n2020-01-03,1,3\n2020-01-06,,4\n")
    panel = load_panel(path, LoadOptions(fill_policy="forward-fill"))
    # the leading gap cannot be filled
    assert panel.report.dropped_rows == [2]
    assert panel.report.filled_rows == [4]
    np.testing.assert_array_equal(panel.values[:, 0], [1.0, 1.0])


def test_load_report_json_is_sorted(tmp_path: Path) -> None:
    panel = load_panel(_write(tmp_path, "date,A\n2020-01-02,1\n2020-01-03,2\n"))
    text = panel.report.write_json(tmp_path / "report.json").read_text(encoding="utf-8")
    keys = [line.split('"')[1] for line in text.splitlines() if line.startswith('  "')]
    assert keys == sorted(keys)


def test_write_panel_round_trip_is_exact(tmp_path: Path, make_panel) -> None:
    values = np.array([[0.1, 1.0 / 3.0], [2.0e-17, -7.123456789012345], [1e10, 5.0]])
    panel = make_panel(values)
    again = load_panel(write_panel(panel, tmp_path / "out.csv"))
    np.testing.assert_array_equal(again.values, values)
    assert again.labels == panel.labels


def test_lagged_pair_centering_example(make_panel) -> None:
    pair = make_lagged_pair(make_panel([1.0, 2.0, 3.0]), center=True)
    np.testing.assert_allclose(pair.current[:, 0], [0.0, 1.0])
    np.testing.assert_allclose(pair.lagged[:, 0], [-1.0, 0.0])


def test_lagged_pair_uncentered_views(make_panel) -> None:
    pair = make_lagged_pair(make_panel([1.0, 2.0, 4.0]))
    np.testing.assert_array_equal(pair.current[:, 0], [2.0, 4.0])
    np.testing.assert_array_equal(pair.differences[:, 0], [1.0, 2.0])


def test_lagged_pair_needs_three_rows(make_panel) -> None:
    with pytest.raises(InsufficientDataError):
        make_lagged_pair(make_panel([1.0, 2.0]))


def test_rolling_windows_split_and_horizon(make_panel) -> None:
    panel = make_panel(np.arange(10.0))
    pairs = rolling_windows(panel, window=4, step=2, horizon=3)
    assert [ins.values[0, 0] for ins, _ in pairs] == [0.0, 2.0, 4.0]
    assert [outs.m for _, outs in pairs] == [3, 3, 2]
    assert pairs[0][1].values[0, 0] == 4.0


def test_rolling_windows_horizon_defaults_to_window(make_panel) -> None:
    pairs = rolling_windows(make_panel(np.arange(12.0)), window=4, step=4)
    assert [outs.m for _, outs in pairs] == [4, 4]


def test_rolling_windows_rejects_bad_arguments(make_panel) -> None:
    with pytest.raises(DataError):
        rolling_windows(make_panel(np.arange(10.0)), window=2, step=1)
    with pytest.raises(DataError):
        rolling_windows(make_panel(np.arange(10.0)), window=4, step=0)


def test_difference_and_select_columns(make_panel) -> None:
    panel = make_panel(np.array([[1.0, 10.0, 5.0], [3.0, 11.0, 5.0], [6.0, 9.0, 4.0]]))
    diffs = difference(panel)
    np.testing.assert_array_equal(diffs.values[:, 0], [2.0, 3.0])
    assert list(diffs.timestamps) == [1, 2]
    picked = select_columns(panel, [2, 0])
    assert picked.labels == ("S3", "S1")
    with pytest.raises(DataError):
        select_columns(panel, [])
