from __future__ import annotations

import argparse
import logging
import sys
from typing import Any, Sequence

from pydantic import ValidationError

from sparsemr.cli.commands import COMMANDS
from sparsemr.cli.schemas import parse_cardinalities, resolve_config
from sparsemr.exceptions import DataError, DomainError, NumericalError
from sparsemr.logging_utils import configure_logging

logger = logging.getLogger("sparsemr.cli")

EXIT_OK = 0
EXIT_DATA = 2
EXIT_NUMERICAL = 3


def _floats(text: str) -> list[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _ints(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text!r}") from exc


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--input", default=None, help="CSV panel: date column then one column per asset")
    p.add_argument("--config", default=None, help="JSON RunConfig; flags override it")
    p.add_argument("--out", default=None, help="output directory (default $SPARSEMR_OUTPUT_DIR)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--dt", type=float, default=None, help="years per row (default 1/252)")
    p.add_argument("--fill-policy", choices=["drop-row", "forward-fill"], default=None)
    p.add_argument("--report", action="store_true", default=None, help="write load_report.json")
    p.add_argument("--difference", action="store_true", default=None)
    p.add_argument("--n-jobs", type=int, default=None)
    p.add_argument("--verbose", action="store_true", help="DEBUG logging")


def _add_estimation(p: argparse.ArgumentParser) -> None:
    p.add_argument("--estimator", choices=["ols", "lasso", "endogenous"], default=None)
    p.add_argument("--gamma", type=float, default=None, help="LASSO penalty")
    p.add_argument("--zero-fraction", type=float, default=None)
    p.add_argument("--rho", type=float, default=None, help="covariance selection penalty")
    p.add_argument("--sigma", type=float, default=None, help="endogenous noise level")
    p.add_argument("--center", action="store_true", default=None, help="demean both views")
    p.add_argument("--refine", action="store_true", default=None)


def _add_search(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=parse_cardinalities, default=None, help="e.g. 3, 1-8 or 2,4,6")
    p.add_argument("--method", choices=["greedy", "sdp", "oracle"], default=None)
    p.add_argument("--sense", choices=["minimize", "maximize"], default=None)


def _add_windows(p: argparse.ArgumentParser) -> None:
    p.add_argument("--window", type=int, default=None)
    p.add_argument("--step", type=int, default=None)
    p.add_argument("--horizon", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsemr")
    sub = parser.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="Box-Tiao or Johansen canonical portfolios")
    _add_common(d)
    _add_windows(d)
    d.add_argument("--flavor", choices=["box_tiao", "johansen"], default=None)
    d.add_argument("--center", action="store_true", default=None, help="demean both views")

    s = sub.add_parser("sparse", help="sparse mean-reverting portfolios per cardinality")
    _add_common(s)
    _add_windows(s)
    _add_estimation(s)
    _add_search(s)
    s.add_argument("--compare", action="store_true", default=None, help="greedy vs SDP table")
    s.add_argument("--timing", type=_ints, default=None, help="problem sizes for timing.csv")
    s.add_argument("--save-model", action="store_true", default=None)

    c = sub.add_parser("covsel", help="covariance selection and dependence network")
    _add_common(c)
    _add_estimation(c)
    _add_search(c)
    c.add_argument("--rho-sweep", type=_floats, default=None)
    c.add_argument("--cluster-search", action="store_true", default=None)

    b = sub.add_parser("backtest", help="out-of-sample convergence trading vs cardinality")
    _add_common(b)
    _add_windows(b)
    _add_estimation(b)
    _add_search(b)
    b.add_argument("--bid-ask", type=float, default=None)
    b.add_argument("--rate", type=float, default=None, help="risk-free rate r")
    b.add_argument("--wealth", type=float, default=None, help="initial wealth")

    y = sub.add_parser("synth", help="write a seeded synthetic panel")
    _add_common(y)
    y.add_argument("--kind", choices=["spread", "block", "coint", "ar1", "var"], default=None)
    y.add_argument("--m", type=int, default=None)
    y.add_argument("--n", type=int, default=None)
    y.add_argument("--block-size", type=int, default=None)

    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    """Flag values in RunConfig shape; unset flags stay ``None``."""

    def get(name: str) -> Any:
        return getattr(args, name, None)

    center = get("center")
    return {
        "command": args.command,
        "input": get("input"),
        "out": get("out"),
        "seed": get("seed"),
        "dt": get("dt"),
        "fill_policy": get("fill_policy"),
        "report": get("report"),
        "difference": get("difference"),
        "n_jobs": get("n_jobs"),
        "window": get("window"),
        "step": get("step"),
        "horizon": get("horizon"),
        "k": get("k"),
        "method": get("method"),
        "sense": get("sense"),
        "flavor": get("flavor"),
        "compare": get("compare"),
        "timing": get("timing"),
        "save_model": get("save_model"),
        "rho_sweep": get("rho_sweep"),
        "cluster_search": get("cluster_search"),
        "estimation": {
            "transition": get("estimator"),
            "gamma": get("gamma"),
            "zero_fraction": get("zero_fraction"),
            "rho": get("rho"),
            "sigma": get("sigma"),
            "center": True if center else None,
            "refine": get("refine"),
        },
        "trade": {"bid_ask": get("bid_ask"), "r": get("rate"), "w0": get("wealth")},
        "synth": {
            "kind": get("kind"),
            "m": get("m"),
            "n": get("n"),
            "block_size": get("block_size"),
        },
    }


def run(args: argparse.Namespace) -> int:
    try:
        config = resolve_config(overrides_from_args(args), args.config)
        written = COMMANDS[config.command](config)
    except (DataError, FileNotFoundError, ValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except (NumericalError, DomainError) as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    for path in written:
        print(path)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(verbose=args.verbose)
    return run(args)


if __name__ == "__main__":
    sys.exit(main())
