"""Simulation studies and the synthetic many-component benchmark."""

from .config import DgmConfig, DgmKind, ModelEntry, StudyConfig, TrueParams
from .dgm import benchmark_truth, generate_dgm, simulate_path, simulate_replicate
from .presets import (
    PRESETS,
    airbnb_style_benchmark,
    benchmark_models,
    simulation_study_1,
    simulation_study_2,
)
from .runner import StudyReport, run_airbnb_style_benchmark, run_replicate, run_study

__all__ = [
    "DgmConfig",
    "DgmKind",
    "ModelEntry",
    "StudyConfig",
    "TrueParams",
    "benchmark_truth",
    "generate_dgm",
    "simulate_path",
    "simulate_replicate",
    "PRESETS",
    "airbnb_style_benchmark",
    "benchmark_models",
    "simulation_study_1",
    "simulation_study_2",
    "StudyReport",
    "run_airbnb_style_benchmark",
    "run_replicate",
    "run_study",
]
