"""Synthetic tunnel scenarios and a trainable toy detector.

Desk-scale stand-in for the field: scripted entities rendered onto small
grayscale rasters, a deterministic prototype detector, and the closed-loop
experiment that demonstrates FP reduction from negative-class training.
"""

from .scenarios import (
    EntitySpec,
    ScenarioError,
    ScenarioSpec,
    car,
    dark_smear,
    fire,
    generate_scenario,
    glare_artifact,
    person,
    truth_stream,
)
from .detector import DetectorConfig, ToyDetectorModel, toy_infer, toy_train, window_features
from .closed_loop import ClosedLoopReport, ScenarioSuite, default_suite, run_closed_loop

__all__ = [
    "EntitySpec",
    "ScenarioError",
    "ScenarioSpec",
    "car",
    "person",
    "fire",
    "glare_artifact",
    "dark_smear",
    "generate_scenario",
    "truth_stream",
    "DetectorConfig",
    "ToyDetectorModel",
    "toy_train",
    "toy_infer",
    "window_features",
    "ScenarioSuite",
    "default_suite",
    "run_closed_loop",
    "ClosedLoopReport",
]
