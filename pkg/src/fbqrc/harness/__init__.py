"""Configuration, presets, experiment runner and file emitters."""

from .config import ExperimentConfig
from .emit import emit_csv, emit_svg
from .presets import PRESETS, get_preset
from .runner import ResultTable, run_esn, run_experiment, run_sweep

__all__ = ["ExperimentConfig", "PRESETS", "ResultTable", "emit_csv", "emit_svg", "get_preset",
           "run_esn", "run_experiment", "run_sweep"]
