"""Gradient noise scale estimation, batch-size advice and augmentation grouping."""

import json

from ._core import (
    CatalogError,
    ConfigError,
    DataError,
    DegenerateInputError,
    Error,
    GnsAccumulator,
    InsufficientSignalError,
    NumericError,
    ParseError,
    ShapeError,
    UsageError,
    eps_opt,
    exact_simple_noise,
    frechet_distance,
    group_distances,
    paired_batch_stats,
    quadratic_eps_max,
    quadratic_true_noise_scale,
    recommend_batch,
    shuffle_epoch,
    tradeoff_curve,
    transform_catalog,
)
from ._core import _run_command

COMMANDS = ("train", "estimate-gns", "sweep", "verify-quadratic", "group-transforms")


def run(command, **config):
    """Run a CLI subcommand in-process and return its report as a dict.

    Keyword arguments are config keys, e.g. ``run("train", seed=1, steps=100)``.
    """
    values = {key: _format(value) for key, value in config.items()}
    return json.loads(_run_command(command, values))


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ",".join(str(v) for v in value)
    return str(value)


__all__ = [name for name in dir() if not name.startswith("_")]
