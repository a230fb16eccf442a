"""Data models for tonesplat."""

from .scene import GaussianRecord, CameraRecord, SceneFile
from .degradation import DegradationMode, Profile, DegradationParams, ViewDegradation, DegradationManifest
from .config import (
    LearningRates,
    SceneSection,
    DegradeSection,
    TrainConfig,
    EvalSection,
    RunConfig,
    load_run_config,
    validate_run_config,
)
from .reports import GradReport, LossRecord, ChromaStats, MetricsRow, EvalReport, ComparisonRow, RunManifest

__all__ = [
    "GaussianRecord",
    "CameraRecord",
    "SceneFile",
    "DegradationMode",
    "Profile",
    "DegradationParams",
    "ViewDegradation",
    "DegradationManifest",
    "LearningRates",
    "SceneSection",
    "DegradeSection",
    "TrainConfig",
    "EvalSection",
    "RunConfig",
    "load_run_config",
    "validate_run_config",
    "GradReport",
    "LossRecord",
    "ChromaStats",
    "MetricsRow",
    "EvalReport",
    "ComparisonRow",
    "RunManifest",
]
