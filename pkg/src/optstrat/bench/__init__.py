"""Benchmark families and desk-scale experiment drivers."""

from .families import DEFAULT_SIZES, FAMILIES, BenchmarkSpec, SpecError, generate
from .pipeline import PipelineRun, PipelineSeeds, desk_table, reproduce_example, run_pipeline

__all__ = ["DEFAULT_SIZES", "FAMILIES", "BenchmarkSpec", "PipelineRun", "PipelineSeeds",
           "SpecError", "desk_table", "generate", "reproduce_example", "run_pipeline"]
