"""Experiment driver, reports, acceptance checks and command line."""
from .experiments import (
    Cell,
    ConvergenceReport,
    ExperimentSpec,
    HRule,
    fit_slope,
    run_convergence,
    run_resonance_scan,
)
