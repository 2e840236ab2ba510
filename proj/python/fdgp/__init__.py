"""Stochastic hyperparameter learning for feature-space Gaussian processes."""

import json

from . import _core
from ._core import AllDiverged, exact_nll, gen_synthetic, posterior, profile_nll, self_check

__all__ = [
    "AllDiverged",
    "default_config",
    "exact_nll",
    "gen_synthetic",
    "grid_search",
    "posterior",
    "profile_nll",
    "run_experiment",
    "self_check",
]


def default_config():
    """Default experiment configuration as a dict."""
    return json.loads(_core.default_config())


def run_experiment(config=None, **overrides):
    """Runs one configuration and returns its run record as a dict.

    Keys not given keep their defaults; nested dicts ("features", "synthetic")
    are merged key by key.
    """
    return json.loads(_core.run_experiment(json.dumps(_merge(config, overrides))))


def grid_search(config=None, **overrides):
    """Runs every rate in config["grid"]; returns best_rate, best and runs."""
    return json.loads(_core.grid_search(json.dumps(_merge(config, overrides))))


def _merge(config, overrides):
    merged = dict(config or {})
    merged.update(overrides)
    return merged
