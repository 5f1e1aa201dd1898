"""Closed-loop simulation: scenarios, controllers, trials and batches."""

from .batch import BatchResult, batch_run, compare, compare_grid
from .scenario import Controller, Scenario, TargetMotion, lab_scenario, mobile_scenario, static_scenario
from .trial import TrialResult, run_trial

__all__ = [
    "BatchResult", "Controller", "Scenario", "TargetMotion", "TrialResult", "batch_run",
    "compare", "compare_grid", "lab_scenario", "mobile_scenario", "run_trial", "static_scenario",
]
