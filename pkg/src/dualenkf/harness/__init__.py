from .experiment import (
    Check,
    ConvergenceResult,
    ExperimentResult,
    SweepResult,
    VerifyReport,
    convergence_study,
    run_experiment,
    sweep_gamma,
    verify_suite,
)
from .records import COLUMNS, RunRecord, read_records, write_records
from .scenario import Scenario, load_scenario, parse_scenario

__all__ = [
    "COLUMNS",
    "Check",
    "ConvergenceResult",
    "ExperimentResult",
    "RunRecord",
    "Scenario",
    "SweepResult",
    "VerifyReport",
    "convergence_study",
    "load_scenario",
    "parse_scenario",
    "read_records",
    "run_experiment",
    "sweep_gamma",
    "verify_suite",
    "write_records",
]
