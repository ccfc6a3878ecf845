"""Subcommand bodies. Each takes a validated RunConfig and returns the files it wrote."""

from __future__ import annotations

import logging
import math
import time
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from sparsemr.cli.schemas import RunConfig
from sparsemr.config import get_output_dir
from sparsemr.data.panel import (
    LoadOptions,
    TimePanel,
    difference,
    load_panel,
    make_lagged_pair,
    rolling_windows,
    write_panel,
)
from sparsemr.data.simulations import SynthConfig, generate_panel
from sparsemr.exceptions import DataError, DomainError, InsufficientDataError, SparseMRError
from sparsemr.models import covsel
from sparsemr.models.canonical import (
    Flavor,
    box_tiao,
    johansen,
    summary_table,
    weights_table,
)
from sparsemr.models.estimation import sample_covariance
from sparsemr.models.export import export_joblib, write_frame, write_json, write_manifest
from sparsemr.models.problem import SolverMethod, SparseProblem
from sparsemr.models.sparse import (
    estimate_model,
    greedy_search,
    path_table,
    sparse_mean_reverting,
    sparse_path,
)
from sparsemr.trading.backtest import backtest
from sparsemr.trading.ou import OuParams, TradeConfig, estimate_ou, leverage_bound

logger = logging.getLogger(__name__)


def _prepare(config: RunConfig) -> Path:
    out_dir = config.out_dir(get_output_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "run_config.json", config.model_dump(mode="json"))
    return out_dir


def _load(config: RunConfig, out_dir: Path) -> TimePanel:
    panel = load_panel(config.input, LoadOptions(dt=config.dt, fill_policy=config.fill_policy))
    if config.report and panel.report is not None:
        panel.report.write_json(out_dir / "load_report.json")
    if config.difference:
        panel = difference(panel)
    return panel


def _check_cardinalities(config: RunConfig, n: int) -> list[int]:
    if config.k[-1] > n:
        raise DataError(f"cardinality {config.k[-1]} exceeds the {n} assets in {config.input}")
    return config.k


def _date_column(panel: TimePanel) -> list[str]:
    stamps = panel.timestamps
    if isinstance(stamps, pd.DatetimeIndex):
        return list(stamps.strftime("%Y-%m-%d"))
    return [str(s) for s in stamps]


def cmd_decompose(config: RunConfig) -> list[Path]:
    out_dir = _prepare(config)
    panel = _load(config, out_dir)
    if config.window:
        panel = panel.rows(0, min(config.window, panel.m))
    if config.flavor is Flavor.JOHANSEN:
        basis = johansen(panel)
    else:
        basis = box_tiao(make_lagged_pair(panel, center=config.estimation.center))
    # Box-Tiao tracks start one row later: they are built from the current view
    dates = _date_column(panel)[panel.m - basis.portfolio_series.shape[0] :]

    written = [
        write_frame(out_dir / "summary.csv", summary_table(basis, panel.dt)),
        write_frame(out_dir / "weights.csv", weights_table(basis)),
        write_json(out_dir / "basis.json", basis.to_dict()),
    ]
    for j in range(basis.n):
        track = pd.DataFrame({"date": dates, "value": basis.portfolio_series[:, j]})
        written.append(write_frame(out_dir / "tracks" / f"portfolio_{j + 1}.csv", track))
    written.append(
        write_manifest(
            out_dir,
            "decompose",
            {
                "summary.csv": {"x": "portfolio", "y": ["nu", "lambda"]},
                "weights.csv": {"x": "portfolio", "y": list(panel.labels)},
                "tracks/portfolio_<j>.csv": {"x": "date", "y": ["value"]},
            },
        )
    )
    logger.info("Decomposed %d assets (%s) into %s", panel.n, config.flavor.value, out_dir)
    return written


def _random_problem(n: int, rng: np.random.Generator) -> SparseProblem:
    g = rng.standard_normal((n, n))
    h = rng.standard_normal((n, n))
    return SparseProblem(g @ g.T, h @ h.T + n * np.eye(n), n)


def timing_table(sizes: list[int], seed: int) -> pd.DataFrame:
    """Wall-clock seconds of a full greedy sweep per problem size."""
    rng = np.random.default_rng(seed)
    rows = []
    for n in sizes:
        problem = _random_problem(n, rng)
        start = time.perf_counter()
        greedy_search(problem)
        rows.append({"n": n, "seconds": time.perf_counter() - start})
        logger.info("Greedy sweep n=%d took %.3fs", n, rows[-1]["seconds"])
    return pd.DataFrame(rows)


def _comparison(panel: TimePanel, config: RunConfig) -> pd.DataFrame:
    options = config.estimation_options()
    model = estimate_model(panel, options)
    greedy = sparse_path(panel, config.k, SolverMethod.GREEDY, options, model=model)
    relaxed = sparse_path(panel, config.k, SolverMethod.SDP, options, model=model)
    return pd.DataFrame(
        {
            "k": config.k,
            "greedy_value": [p.value for p in greedy],
            "sdp_value": [p.value for p in relaxed],
            "sdp_bound": [p.objective_bound for p in relaxed],
            "greedy_lambda": [p.lambda_ou for p in greedy],
            "sdp_lambda": [p.lambda_ou for p in relaxed],
        }
    )


def _window_row(
    in_sample: TimePanel, out_sample: TimePanel, config: RunConfig, index: int
) -> list[dict[str, Any]]:
    try:
        portfolios = sparse_path(in_sample, config.k, config.method, config.estimation_options())
    except SparseMRError as exc:
        logger.warning("Window %d skipped: %s", index, exc)
        return []
    rows = []
    for portfolio in portfolios:
        track = out_sample.values @ portfolio.weights
        try:
            lam_out = estimate_ou(track, out_sample.dt).lam
        except SparseMRError:
            lam_out = math.nan
        rows.append(
            {
                "window": index,
                "k": portfolio.k,
                "lambda_in": portfolio.lambda_ou,
                "lambda_out": lam_out,
                "range_out": float(np.ptp(track)),
            }
        )
    return rows


def _band(frame: pd.DataFrame, columns: list[str]) -> pd.DataFrame:
    """Mean and one-standard-deviation band per cardinality."""
    grouped = frame.groupby("k")[columns]
    means = grouped.mean().add_suffix("_mean")
    spreads = grouped.std(ddof=1).add_suffix("_std")
    table = pd.concat([means, spreads], axis=1)
    for column in columns:
        table[f"{column}_lower"] = table[f"{column}_mean"] - table[f"{column}_std"]
        table[f"{column}_upper"] = table[f"{column}_mean"] + table[f"{column}_std"]
    table["windows"] = grouped.size()
    return table.reset_index()


def _windows(panel: TimePanel, config: RunConfig) -> list[tuple[TimePanel, TimePanel]]:
    window, step, horizon = config.windowing()
    pairs = rolling_windows(panel, window, step, horizon)
    if not pairs:
        raise InsufficientDataError(
            f"panel of {panel.m} rows leaves no out-of-sample block for window {window}"
        )
    return pairs


def cmd_sparse(config: RunConfig) -> list[Path]:
    out_dir = _prepare(config)
    panel = _load(config, out_dir)
    ks = _check_cardinalities(config, panel.n)
    options = config.estimation_options()
    model = estimate_model(panel, options)
    portfolios = sparse_path(panel, ks, config.method, options, model=model)
    table = path_table(portfolios)

    written = [
        write_frame(out_dir / "portfolios.csv", table),
        write_frame(out_dir / "curve.csv", table[["k", "nu", "lambda", "upper_bound"]]),
        write_json(out_dir / "portfolios.json", {"portfolios": [p.to_dict() for p in portfolios]}),
    ]
    files: dict[str, dict[str, Any]] = {
        "portfolios.csv": {"x": "k", "y": list(panel.labels)},
        "curve.csv": {"x": "k", "y": ["nu", "lambda", "upper_bound"]},
    }
    if config.save_model:
        written.append(export_joblib(out_dir / "model.joblib", model))
    if config.compare:
        written.append(write_frame(out_dir / "compare.csv", _comparison(panel, config)))
        files["compare.csv"] = {"x": "k", "y": ["greedy_value", "sdp_value", "sdp_bound"]}
    if config.timing:
        timing = timing_table(config.timing, config.seed)
        written.append(write_frame(out_dir / "timing.csv", timing))
        files["timing.csv"] = {"x": "n", "y": ["seconds"]}
    if config.window:
        pairs = _windows(panel, config)
        rows = Parallel(n_jobs=config.n_jobs)(
            delayed(_window_row)(ins, outs, config, i) for i, (ins, outs) in enumerate(pairs)
        )
        detail = pd.DataFrame([row for chunk in rows for row in chunk])
        if detail.empty:
            raise InsufficientDataError("no rolling window produced a sparse portfolio")
        written.append(write_frame(out_dir / "windows.csv", detail))
        written.append(
            write_frame(
                out_dir / "window_curve.csv",
                _band(detail, ["lambda_in", "lambda_out", "range_out"]),
            )
        )
        files["window_curve.csv"] = {
            "x": "k",
            "y": ["lambda_in_mean", "lambda_out_mean", "range_out_mean"],
            "bands": "mean +/- one standard deviation",
        }
    written.append(write_manifest(out_dir, "sparse", files))
    logger.info("Sparse path over k=%s written to %s", ks, out_dir)
    return written


def cmd_covsel(config: RunConfig) -> list[Path]:
    out_dir = _prepare(config)
    panel = _load(config, out_dir)
    rho = config.estimation.rho
    if rho is None:
        raise DataError("covsel needs --rho")
    sigma = sample_covariance(panel)
    estimate = covsel.graphical_lasso(sigma, rho, labels=panel.labels)
    report = covsel.is_chordal(estimate.graph)
    labels = panel.labels

    clusters = pd.DataFrame(
        [
            {
                "cluster": c + 1,
                "size": len(members),
                "members": " ".join(labels[i] for i in members),
            }
            for c, members in enumerate(estimate.clusters)
        ]
    )
    written = [
        write_frame(
            out_dir / "edges.csv",
            pd.DataFrame(
                estimate.to_dict()["edges"],
                columns=["i", "j", "label_i", "label_j", "weight", "sign"],
            ),
        ),
        write_frame(out_dir / "clusters.csv", clusters),
        write_json(
            out_dir / "chordality.json",
            {
                "chordal": report.chordal,
                "elimination_order": [labels[i] for i in report.elimination_order]
                if report.elimination_order
                else None,
                "edges": estimate.edge_count,
                "kkt_residual": estimate.kkt_residual,
                "converged": estimate.converged,
            },
        ),
        write_json(out_dir / "precision.json", estimate.to_dict()),
    ]
    files: dict[str, dict[str, Any]] = {
        "edges.csv": {"x": "label_i", "y": ["label_j", "weight"]},
        "clusters.csv": {"x": "cluster", "y": ["size"]},
    }
    if config.rho_sweep:
        sweep = covsel.rho_sweep(sigma, config.rho_sweep, n_jobs=config.n_jobs)
        written.append(write_frame(out_dir / "rho_sweep.csv", pd.DataFrame(sweep)))
        files["rho_sweep.csv"] = {"x": "rho", "y": ["edges", "clusters", "largest_cluster"]}
    if config.cluster_search:
        rows = []
        for c, sub in enumerate(covsel.restrict_to_clusters(panel, estimate), start=1):
            k = min(config.k[-1], sub.n)
            portfolio = sparse_mean_reverting(
                sub, k, config.method, config.estimation_options()
            )
            rows.append(
                {
                    "cluster": c,
                    "k": portfolio.k,
                    "support": " ".join(portfolio.support_labels()),
                    "nu": portfolio.nu,
                    "lambda": portfolio.lambda_ou,
                }
            )
        written.append(write_frame(out_dir / "cluster_portfolios.csv", pd.DataFrame(rows)))
        files["cluster_portfolios.csv"] = {"x": "cluster", "y": ["nu", "lambda"]}
    written.append(write_manifest(out_dir, "covsel", files))
    logger.info(
        "Covariance selection at rho=%g: %d edges, %d clusters",
        rho,
        estimate.edge_count,
        len(estimate.clusters),
    )
    return written


def _leverage_bound(params: OuParams, trade: TradeConfig) -> float:
    try:
        return leverage_bound(params, trade)
    except DomainError:
        return math.nan


def _backtest_window(
    in_sample: TimePanel, out_sample: TimePanel, config: RunConfig, index: int
) -> list[dict[str, Any]]:
    try:
        portfolios = sparse_path(in_sample, config.k, config.method, config.estimation_options())
    except SparseMRError as exc:
        logger.warning("Window %d skipped: %s", index, exc)
        return []
    frictionless = config.trade.model_copy(update={"bid_ask": 0.0})
    rows = []
    for portfolio in portfolios:
        try:
            params = estimate_ou(portfolio.track, in_sample.dt)
        except SparseMRError as exc:
            logger.debug("Window %d, k=%d: OU fit failed (%s)", index, portfolio.k, exc)
            continue
        # trade from the last in-sample close through the out-of-sample block
        prices = np.concatenate(
            [in_sample.values[-1:] @ portfolio.weights, out_sample.values @ portfolio.weights]
        )
        plain = backtest(prices, params, frictionless)
        costed = backtest(prices, params, config.trade)
        rows.append(
            {
                "window": index,
                "k": portfolio.k,
                "lambda": params.lam,
                "leverage_bound": _leverage_bound(params, config.trade),
                "sharpe": plain.sharpe,
                "sharpe_costed": costed.sharpe,
                "turnover": plain.turnover,
                "cost_paid": costed.cost_paid,
                "flags": " ".join(plain.flags + costed.flags),
            }
        )
    return rows


def cmd_backtest(config: RunConfig) -> list[Path]:
    out_dir = _prepare(config)
    panel = _load(config, out_dir)
    _check_cardinalities(config, panel.n)
    pairs = _windows(panel, config)
    chunks = Parallel(n_jobs=config.n_jobs)(
        delayed(_backtest_window)(ins, outs, config, i) for i, (ins, outs) in enumerate(pairs)
    )
    detail = pd.DataFrame([row for chunk in chunks for row in chunk])
    if detail.empty:
        raise InsufficientDataError("no window produced a tradeable portfolio")
    written = [
        write_frame(out_dir / "trades.csv", detail),
        write_frame(out_dir / "sharpe.csv", _band(detail, ["sharpe", "sharpe_costed"])),
        write_manifest(
            out_dir,
            "backtest",
            {
                "sharpe.csv": {
                    "x": "k",
                    "y": ["sharpe_mean", "sharpe_costed_mean"],
                    "bands": "mean +/- one standard deviation",
                    "bid_ask": config.trade.bid_ask,
                },
            },
        ),
    ]
    logger.info("Backtested %d windows into %s", len(pairs), out_dir)
    return written


SYNTH_WIDTHS = {"spread": 8, "block": 44, "coint": 2, "ar1": 2, "var": 4}


def cmd_synth(config: RunConfig) -> list[Path]:
    out_dir = _prepare(config)
    settings = config.synth
    n = SYNTH_WIDTHS[settings.kind]
    if settings.kind in ("spread", "block") and settings.n is not None:
        n = settings.n
    synth = SynthConfig(
        kind=settings.kind,
        m=settings.m,
        n=n,
        seed=config.seed,
        dt=config.dt,
        block_size=settings.block_size,
    )
    panel, planted = generate_panel(synth)
    stem = f"{settings.kind}_{config.seed}"
    written = [
        write_panel(panel, out_dir / f"{stem}.csv"),
        write_json(out_dir / f"{stem}_planted.json", planted),
    ]
    logger.info("Synthetic %s panel written to %s", settings.kind, written[0])
    return written


COMMANDS = {
    "decompose": cmd_decompose,
    "sparse": cmd_sparse,
    "covsel": cmd_covsel,
    "backtest": cmd_backtest,
    "synth": cmd_synth,
}
