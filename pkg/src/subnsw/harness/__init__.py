"""Instance I/O, generators, diagnostics, end-to-end pipeline and CLI."""
from .diagnostics import (GAP_BOUND, LOG_BOUND, GapReport, InputHistogram, OutputQuantiles,
                          input_histogram, output_quantiles, per_agent_gap_check,
                          rearrangement_check, rearrangement_exhaustive, tail_bound)
from .generators import FAMILIES, acceptance_batch, generate_instance
from .io import instance_from_dict, load_instance, parse_instance, serialize_instance
from .pipeline import PipelineConfig, PipelineReport, bench, run_pipeline

__all__ = [
    "GAP_BOUND", "LOG_BOUND", "GapReport", "InputHistogram", "OutputQuantiles", "input_histogram",
    "output_quantiles", "per_agent_gap_check", "rearrangement_check", "rearrangement_exhaustive",
    "tail_bound", "FAMILIES", "acceptance_batch", "generate_instance", "instance_from_dict",
    "load_instance", "parse_instance", "serialize_instance", "PipelineConfig", "PipelineReport",
    "bench", "run_pipeline",
]
