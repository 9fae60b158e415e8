"""Python bindings for the atlas-lab C++ core."""

import json as _json
from os import PathLike as _PathLike
from typing import Any, Mapping, Union

from . import _atlas_lab
from ._atlas_lab import (
    ConfigError,
    DimensionError,
    DomainError,
    Error,
    World,
    finite_sample_bound,
    fit,
    fit_base_chain,
    gap_closed,
    haversine_km,
    js_divergence,
    builtin_partition,
    partition_diagnostics,
    poi_frequency_jsd,
    recover_group_means,
    tilted_poi_mean,
    tv_distance,
)

__all__ = [
    "ConfigError",
    "DimensionError",
    "DomainError",
    "Error",
    "World",
    "build_world",
    "finite_sample_bound",
    "fit",
    "fit_base_chain",
    "gap_closed",
    "haversine_km",
    "js_divergence",
    "builtin_partition",
    "partition_diagnostics",
    "poi_frequency_jsd",
    "recover_group_means",
    "run_experiment",
    "tilted_poi_mean",
    "tv_distance",
]


def build_world(config: Union[Mapping[str, Any], None] = None, **overrides: Any) -> World:
    """Build a synthetic world; keys follow the world config (V, C, K, G, T, seed, ...)."""
    merged = dict(config or {})
    merged.update(overrides)
    return _atlas_lab.build_world(_json.dumps(merged))


def run_experiment(kind: str, config: Mapping[str, Any], base_dir: Union[str, _PathLike] = "") -> list:
    """Run rq1, rq2 or rq3 and write the reports; returns the written paths."""
    return _atlas_lab.run_experiment(kind, _json.dumps(dict(config)), base_dir)
