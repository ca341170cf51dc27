"""Continual reassessment method (CRM) and randomized CRM dose-finding."""

from ._core import (
    ConfigError,
    DesignVariant,
    ModelConfig,
    Posterior,
    Scenario,
    ScenarioResult,
    StateError,
    Trial,
    TrialConfig,
    compute_posterior,
    dlt_probability,
    mtd_index,
    paper_scenarios,
    run_spec_json,
    run_study,
    simulate_trial,
)

__all__ = [
    "ConfigError",
    "DesignVariant",
    "ModelConfig",
    "Posterior",
    "Scenario",
    "ScenarioResult",
    "StateError",
    "Trial",
    "TrialConfig",
    "compute_posterior",
    "dlt_probability",
    "mtd_index",
    "paper_scenarios",
    "run_spec_json",
    "run_study",
    "simulate_trial",
]
