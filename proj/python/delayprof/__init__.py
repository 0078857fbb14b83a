"""Delay-change profiles of transit network edges."""

from ._core import (
    ConfigError,
    PipelineError,
    adjusted_rand_index,
    cut,
    delay_bin_index,
    delay_boundaries,
    delay_labels,
    emd,
    emd_dense,
    ingest,
    normalize,
    pairwise_distances,
    run_pipeline,
    synth,
    ward_linkage,
)

__all__ = [
    "ConfigError",
    "PipelineError",
    "adjusted_rand_index",
    "cut",
    "delay_bin_index",
    "delay_boundaries",
    "delay_labels",
    "emd",
    "emd_dense",
    "ingest",
    "normalize",
    "pairwise_distances",
    "run_pipeline",
    "synth",
    "ward_linkage",
]
