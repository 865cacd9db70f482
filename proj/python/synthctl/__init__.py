"""Python bindings for the synthctl synthetic control library."""

import json

from ._core import (
    SynthctlError,
    ceiling_percentile,
    config_fingerprint,
    exact_p_value,
    haversine_km,
    project_l1_ball,
    project_simplex,
    rmspe_ratio,
    solve_l1_ball_ls,
    solve_ols,
    solve_simplex_wls,
)
from . import _core


def fit(config, estimator=""):
    """Fit every configured outcome; returns the fit documents as dicts."""
    return json.loads(_core.fit_json(str(config), estimator))


def placebo(config, outcome, jobs=1):
    """Placebo study for one outcome as a dict."""
    return json.loads(_core.placebo_json(str(config), outcome, jobs))


def run(command, config, out=None, seed=None, jobs=1):
    """Run a CLI command; returns (exit_code, error_report)."""
    return _core.run(command, str(config), None if out is None else str(out), seed, jobs)


__all__ = [
    "SynthctlError",
    "ceiling_percentile",
    "config_fingerprint",
    "exact_p_value",
    "fit",
    "haversine_km",
    "placebo",
    "project_l1_ball",
    "project_simplex",
    "rmspe_ratio",
    "run",
    "solve_l1_ball_ls",
    "solve_ols",
    "solve_simplex_wls",
]
