"""Particle-in-cell Vlasov-Maxwell solver with scenario validators and diagnostics."""

from .diagnostics import DiagnosticsSeries, gronwall_check, light_cone_check, relative_energy_check
from .history import FieldHistory, MissingSnapshots
from .pic import GridSpec, PICState, init_state, pic_step
from .scenario import (ConfigError, ScenarioConfig, default_coupled_config, default_prototype_config,
                       run_scenario, scenario_checks, validate_scenario)
from .validators import ValidationReport, validate_compatible, validate_well_prepared

__all__ = ["ConfigError", "DiagnosticsSeries", "FieldHistory", "GridSpec", "MissingSnapshots", "PICState",
           "ScenarioConfig", "ValidationReport", "default_coupled_config", "default_prototype_config",
           "gronwall_check", "init_state", "light_cone_check", "pic_step", "relative_energy_check",
           "run_scenario", "scenario_checks", "validate_compatible", "validate_scenario",
           "validate_well_prepared"]
