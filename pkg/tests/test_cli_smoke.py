import json
from pathlib import Path

import pandas as pd
import pytest

from sparsemr.cli.main import EXIT_DATA, EXIT_OK, build_parser, main
from sparsemr.cli.schemas import parse_cardinalities
from sparsemr.exceptions import DataError
from sparsemr.models.estimation import VarModel
from sparsemr.models.export import load_joblib


@pytest.fixture
def spread_csv(tmp_path: Path) -> Path:
    out = tmp_path / "synth"
    argv = ["synth", "--kind", "spread", "--m", "600", "--seed", "3", "--out", str(out)]
    assert main(argv) == EXIT_OK
    return out / "spread_3.csv"


def test_synth_writes_panel_and_planted_structure(spread_csv: Path) -> None:
    frame = pd.read_csv(spread_csv)
    assert frame.shape == (600, 9)
    planted = json.loads((spread_csv.parent / "spread_3_planted.json").read_text())
    assert planted["support"] == [1, 4]


def test_synth_needs_a_seed(tmp_path: Path) -> None:
    assert main(["synth", "--out", str(tmp_path)]) == EXIT_DATA


def test_decompose_outputs(spread_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "decompose"
    assert main(["decompose", "--input", str(spread_csv), "--out", str(out)]) == EXIT_OK
    summary = pd.read_csv(out / "summary.csv")
    assert list(summary["portfolio"]) == list(range(1, 9))
    assert (out / "weights.csv").exists()
    assert (out / "basis.json").exists()
    assert (out / "tracks" / "portfolio_8.csv").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "decompose"


def test_decompose_johansen_flavor(tmp_path: Path) -> None:
    synth = tmp_path / "synth"
    argv = ["synth", "--kind", "coint", "--m", "500", "--seed", "1", "--out", str(synth)]
    assert main(argv) == EXIT_OK
    out = tmp_path / "johansen"
    argv = ["decompose", "--input", str(synth / "coint_1.csv"), "--flavor", "johansen"]
    assert main([*argv, "--out", str(out)]) == EXIT_OK
    assert "trace_statistic" in pd.read_csv(out / "summary.csv").columns


def test_sparse_run_is_reproducible(spread_csv: Path, tmp_path: Path) -> None:
    first, second, third = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    argv = ["sparse", "--input", str(spread_csv), "--k", "1-3", "--save-model"]
    assert main([*argv, "--out", str(first)]) == EXIT_OK
    assert main([*argv, "--out", str(second)]) == EXIT_OK
    config = first / "run_config.json"
    assert main(["sparse", "--config", str(config), "--out", str(third)]) == EXIT_OK

    table = pd.read_csv(first / "portfolios.csv")
    assert list(table["k"]) == [1, 2, 3]
    model = load_joblib(first / "model.joblib")
    assert isinstance(model, VarModel)
    assert model.a.shape == (8, 8)
    for name in ("portfolios.csv", "curve.csv", "portfolios.json", "manifest.json"):
        content = (first / name).read_bytes()
        assert (second / name).read_bytes() == content
        assert (third / name).read_bytes() == content


def test_sparse_compare_and_windows(spread_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "compare"
    argv = ["sparse", "--input", str(spread_csv), "--k", "1,2", "--compare"]
    argv += ["--window", "200", "--step", "200", "--horizon", "100", "--out", str(out)]
    assert main(argv) == EXIT_OK
    compare = pd.read_csv(out / "compare.csv")
    assert list(compare["k"]) == [1, 2]
    assert (compare["greedy_value"] >= compare["sdp_bound"] - 1e-6).all()
    assert (out / "windows.csv").exists()
    assert (out / "window_curve.csv").exists()


def test_sparse_rejects_cardinality_above_width(spread_csv: Path, tmp_path: Path) -> None:
    argv = ["sparse", "--input", str(spread_csv), "--k", "9", "--out", str(tmp_path)]
    assert main(argv) == EXIT_DATA


def test_covsel_outputs_and_missing_rho(spread_csv: Path, tmp_path: Path) -> None:
    assert main(["covsel", "--input", str(spread_csv), "--out", str(tmp_path / "x")]) == EXIT_DATA
    out = tmp_path / "covsel"
    argv = ["covsel", "--input", str(spread_csv), "--rho", "0.05", "--rho-sweep", "0.5,0.05"]
    assert main([*argv, "--out", str(out)]) == EXIT_OK
    for name in ("edges.csv", "clusters.csv", "chordality.json", "precision.json"):
        assert (out / name).exists()
    sweep = pd.read_csv(out / "rho_sweep.csv")
    assert list(sweep["rho"]) == [0.5, 0.05]


def test_backtest_outputs(spread_csv: Path, tmp_path: Path) -> None:
    out = tmp_path / "backtest"
    argv = ["backtest", "--input", str(spread_csv), "--k", "1-2", "--bid-ask", "0.01"]
    argv += ["--window", "200", "--step", "200", "--horizon", "100", "--out", str(out)]
    assert main(argv) == EXIT_OK
    trades = pd.read_csv(out / "trades.csv")
    assert set(trades["k"]) <= {1, 2}
    assert {"sharpe", "sharpe_costed", "turnover", "cost_paid"} <= set(trades.columns)
    assert (trades.loc[trades["lambda"] > 0, "leverage_bound"] > 0).all()
    assert (out / "sharpe.csv").exists()
    saved = json.loads((out / "run_config.json").read_text())
    assert saved["trade"]["bid_ask"] == 0.01


def test_missing_input_file_exits_with_data_code(tmp_path: Path) -> None:
    argv = ["sparse", "--input", str(tmp_path / "absent.csv"), "--out", str(tmp_path)]
    assert main(argv) == EXIT_DATA
    assert main(["sparse", "--out", str(tmp_path)]) == EXIT_DATA


def test_parse_cardinalities() -> None:
    assert parse_cardinalities("3") == [3]
    assert parse_cardinalities("1-4,6") == [1, 2, 3, 4, 6]
    with pytest.raises(DataError):
        parse_cardinalities("a-b")


def test_parser_requires_a_command() -> None:
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
