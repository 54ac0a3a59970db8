"""Smooth flow matching: generative modelling of sparse functional data."""

import json

from ._core import (
    Dataset,
    GaussianModel,
    Grid,
    Model,
    SfmError,
    Truth,
    denoise,
    fit_gp,
    fpca,
    hungarian,
    mse_against_truth,
    prediction_errors,
    set_threads,
    simulate,
    wasserstein2,
)
from ._core import _fit

__all__ = [
    "Dataset",
    "GaussianModel",
    "Grid",
    "Model",
    "SfmError",
    "Truth",
    "denoise",
    "fit",
    "fit_gp",
    "fpca",
    "hungarian",
    "mse_against_truth",
    "prediction_errors",
    "set_threads",
    "simulate",
    "wasserstein2",
]


def fit(dataset, config=None):
    """Fit the flow field and copula.

    ``config`` uses the generator section of the CLI run config, e.g.
    ``{"flow": {"H": 20, "seed": 3}, "base": "student-t", "steps": 50}``.
    """
    return _fit(dataset, json.dumps(config or {}))
