"""Configuration, IO, experiment orchestration and the command line."""

from .config import ExperimentConfig, HyperConfig, load_config
from .experiment import (
    ExperimentReport,
    StageError,
    compute_metrics,
    convergence_study,
    fit_dataset,
    run_experiment,
)
from .io import load_dataset, save_dataset
