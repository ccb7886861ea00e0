"""Single-excitation preparation in Rydberg superatoms.

Lindblad model of a blockaded atomic ensemble in a truncated collective
basis, analytic DRAG pulse families, two-stage parametrized pulse
optimization and constrained GRAPE.
"""

from __future__ import annotations

from .errors import IntegrationFailure, InvalidArgument, OptimizationFailure
from .experiments import (
    SweepCell,
    SweepSpec,
    convergence_scan,
    dephasing_free_study,
    dominant_leakage,
    high_n_scenarios,
    run_sweep,
    write_sweep,
)
from .model import (
    LeakageTables,
    PhysicalParams,
    StateSpace,
    SuperatomModel,
    build_model,
    read_tables,
    scaled_shifts_and_rates,
    thermal_decay_factor,
    write_tables,
)
from .optimizer import (
    Bounds,
    DEConfig,
    GrapeObjective,
    GrapeProblem,
    LocalConfig,
    OptimizationResult,
    finite_diff_gradient,
    grape_optimize,
    leak_target,
    loss,
    optimize_parametrized,
)
from .propagator import IntegratorConfig, Trajectory, evolve, total_rydberg_population
from .pulses import (
    ControlSamples,
    PulseParams,
    Shape,
    pi_pulse_amplitude,
    read_controls,
    sample_pulse,
    savitzky_golay,
    write_controls,
)

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "ControlSamples",
    "DEConfig",
    "GrapeObjective",
    "GrapeProblem",
    "IntegrationFailure",
    "IntegratorConfig",
    "InvalidArgument",
    "LeakageTables",
    "LocalConfig",
    "OptimizationFailure",
    "OptimizationResult",
    "PhysicalParams",
    "PulseParams",
    "Shape",
    "StateSpace",
    "SuperatomModel",
    "SweepCell",
    "SweepSpec",
    "Trajectory",
    "build_model",
    "convergence_scan",
    "dephasing_free_study",
    "dominant_leakage",
    "evolve",
    "finite_diff_gradient",
    "grape_optimize",
    "high_n_scenarios",
    "leak_target",
    "loss",
    "optimize_parametrized",
    "pi_pulse_amplitude",
    "read_controls",
    "read_tables",
    "run_sweep",
    "sample_pulse",
    "savitzky_golay",
    "scaled_shifts_and_rates",
    "thermal_decay_factor",
    "total_rydberg_population",
    "write_controls",
    "write_sweep",
    "write_tables",
]
