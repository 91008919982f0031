"""Displacement-based forecasting engine for atomic trajectories.

The heavy lifting lives in the C++ extension module; this package re-exports
its public surface.
"""

from atomcast._core import (
    AtomcastError,
    Forecaster,
    MorseParams,
    MorseTable,
    ThresholdTable,
    Trajectory,
    compute_displacements,
    compute_thresholds,
    diffusivity,
    fit_morse,
    forecast_errors,
    generate,
    morse_energy,
    read_morse_csv,
    read_trajectory,
    reconstruct_positions,
    split_dataset,
    train_forecaster,
    violations,
    write_morse_csv,
    write_trajectory,
)

__all__ = [
    "AtomcastError",
    "Forecaster",
    "MorseParams",
    "MorseTable",
    "ThresholdTable",
    "Trajectory",
    "compute_displacements",
    "compute_thresholds",
    "diffusivity",
    "fit_morse",
    "forecast_errors",
    "generate",
    "morse_energy",
    "read_morse_csv",
    "read_trajectory",
    "reconstruct_positions",
    "split_dataset",
    "train_forecaster",
    "violations",
    "write_morse_csv",
    "write_trajectory",
]

__version__ = "0.1.0"
