"""
Data models and type definitions for cohort simulation.
"""

from .dataset import ColumnSchema, MixedDataset, ThresholdDiscretizer, categorical, continuous
from .reports import FidelityReport, PValueExperiment, PValueStudy
from .scenario import (
    PatientState,
    RunResult,
    ScenarioConfig,
    TrajectoryStep,
    TreatmentEntry,
    create_default_scenario_config,
)
from .unified import CommandResult, PipelineStage, PipelineState

__all__ = [
    "ColumnSchema",
    "CommandResult",
    "FidelityReport",
    "MixedDataset",
    "PValueExperiment",
    "PValueStudy",
    "PatientState",
    "PipelineStage",
    "PipelineState",
    "RunResult",
    "ScenarioConfig",
    "ThresholdDiscretizer",
    "TrajectoryStep",
    "TreatmentEntry",
    "categorical",
    "continuous",
    "create_default_scenario_config",
]
