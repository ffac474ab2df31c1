"""Deterministic multi-agent semantic mapping simulator with ontology-backed
environment classification."""

__version__ = "0.1.0"

from .ontology import UNKNOWN, Ontology, builtin_ontology, load_ontology
from .scenario import PRESETS, ScenarioSpec, generate_scenario, ground_truth_grid, load_scenario
from .semantics import SegmentFeatures, environment_distribution
from .trial import TrialConfig, config_from_dict, load_config, run_batch, run_trial

__all__ = [
    "UNKNOWN", "Ontology", "builtin_ontology", "load_ontology", "PRESETS", "ScenarioSpec",
    "generate_scenario", "ground_truth_grid", "load_scenario", "SegmentFeatures",
    "environment_distribution", "TrialConfig", "config_from_dict", "load_config",
    "run_batch", "run_trial", "__version__",
]
