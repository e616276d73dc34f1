"""Calibration, grounding metrics, generation benchmarking and the report-swap protocol."""

from .benchmark import GenerationPair, generation_benchmark
from .grounding import average_precision, grounding_map, grounding_miou
from .protocol import EvalRecord, ProtocolConfig, calibration_samples, run_protocol
from .roc import CalibrationResult, DegenerateRocError, RocCurve, calibrate, roc, youden
from .stats import per_pathology_stats

__all__ = [
    "CalibrationResult", "DegenerateRocError", "EvalRecord", "GenerationPair", "ProtocolConfig", "RocCurve",
    "average_precision", "calibrate", "calibration_samples", "generation_benchmark", "grounding_map",
    "grounding_miou", "per_pathology_stats", "roc", "run_protocol", "youden",
]
