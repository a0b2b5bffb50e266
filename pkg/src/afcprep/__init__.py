"""Preparation toolkit for atomic-frequency-comb optical memories.

Analytic comb figures of merit, pump-waveform synthesis, rate-equation
simulation of the hyperfine pumping sequence, and decay fitting, with a
command-line front end for the common workflows.
"""

from .bench import BenchRecord, run_benchmark
from .comb import (
    CombMeasurement,
    CombSpec,
    DecayModel,
    HoleDecayModel,
    SpectrumGrid,
    afc_efficiency,
    afc_efficiency_with_background,
    efficiency_decay,
    hole_decay,
    mean_optical_depth,
    optimal_finesse,
    target_psd,
)
from .errors import ConfigError, ResourceLimitError, ValidationError
from .fitting import (
    FitResult,
    fit_afc_decay,
    fit_comb_parameters,
    fit_double_exponential,
    format_report,
    load_points_csv,
)
from .levels import (
    LevelSystem,
    emission_branching,
    load_level_system,
    polarization_strengths,
    transition_table,
)
from .pumping import (
    ClassEnsemble,
    PumpPulse,
    PumpSequence,
    RelaxationParams,
    apply_pulse,
    apply_relaxation,
    bandwidth_limit_scan,
    initial_ensemble,
    run_sequence,
    spectrum_from_ensemble,
)
from .synthesis import (
    Signal,
    SignalMetrics,
    SynthParams,
    schroeder_integral_phase,
    select_phase_constructor,
    signal_metrics,
    synthesize,
    two_scale_phase,
)
from .waveio import read_waveform, sidecar_path, write_table, write_waveform

__version__ = "0.1.0"
