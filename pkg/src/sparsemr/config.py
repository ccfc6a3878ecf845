from __future__ import annotations

import os
from pathlib import Path

# annualized daily sampling
DEFAULT_DT = 1.0 / 252.0

# geneig conditioning
RIDGE_START = 1e-10
RIDGE_CAP = 1e-6
RIDGE_STEP = 10.0
MIN_EIGENVALUE = 1e-12
MAX_CONDITION = 1e12

# estimation
OLS_RIDGE = 1e-8
LASSO_TOL = 1e-8
LASSO_MAX_SWEEPS = 10_000
BISECTION_STEPS = 40
STATIONARITY_SLACK = 1e-6

# covariance selection
GLASSO_MAX_SWEEPS = 500
GLASSO_TOL = 1e-6
EDGE_THRESHOLD = 1e-5

# sparse search
TIE_TOL = 1e-12
ORACLE_MAX_SUPPORTS = 1_000_000
SDP_TOL = 1e-6
SDP_MAX_ITER = 50_000

# OU / trading
MIN_OU_OBS = 10
RATIO_CLAMP = 1e-6

DEFAULT_WINDOW = 100
DEFAULT_HORIZON = 50
DEFAULT_STEP = 50


def get_output_dir() -> Path:
    return Path(os.getenv("SPARSEMR_OUTPUT_DIR", Path.cwd() / "runs"))
