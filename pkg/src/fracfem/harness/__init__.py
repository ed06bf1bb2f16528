"""Configuration, sweeps, acceptance checks and the command line."""
from .acceptance import AcceptanceInputError, CriterionResult, check_acceptance, check_csv
from .config import ConfigError, SweepConfig, dumps, load, loads
from .sweep import SweepResult, run_sweep

__all__ = ["AcceptanceInputError", "ConfigError", "CriterionResult", "SweepConfig",
           "SweepResult", "check_acceptance", "check_csv", "dumps", "load", "loads", "run_sweep"]
