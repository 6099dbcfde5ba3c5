"""Asynchronous peak detection for diffusive molecular communication:
channel model, Poisson threshold statistics, five trace detectors,
closed-form error analysis, Monte Carlo simulation, and a sweep CLI."""

from .channel import (
    ChannelParams,
    expected_isi,
    expected_signal,
    expected_single_release,
    hitting_probability,
    observed_means,
    peak_sample_index,
)
from .detectors import (
    DETECTOR_KINDS,
    AsyncPeakDetector,
    AsyncPeakFeedbackDetector,
    EnergyDetector,
    EnergyFeedbackDetector,
    SingleSampleDetector,
    TraceDetector,
    make_detector,
)
from .analysis import (
    DEFAULT_THRESHOLDS,
    ErrorReport,
    average_error_probability,
    bit_error_probability,
    optimal_threshold,
    threshold_sweep,
)
from .simulation import (
    DEFAULT_SEED,
    SimConfig,
    draw_trace_binomial,
    draw_trace_poisson,
    draw_traces,
    empirical_threshold_sweep,
    generate_sequences,
    measure_ber,
    simulate_particles,
)

__version__ = "0.1.0"

__all__ = [
    "ChannelParams",
    "hitting_probability",
    "expected_single_release",
    "expected_signal",
    "expected_isi",
    "observed_means",
    "peak_sample_index",
    "TraceDetector",
    "SingleSampleDetector",
    "EnergyDetector",
    "AsyncPeakDetector",
    "EnergyFeedbackDetector",
    "AsyncPeakFeedbackDetector",
    "DETECTOR_KINDS",
    "make_detector",
    "ErrorReport",
    "bit_error_probability",
    "average_error_probability",
    "threshold_sweep",
    "optimal_threshold",
    "DEFAULT_THRESHOLDS",
    "SimConfig",
    "DEFAULT_SEED",
    "generate_sequences",
    "draw_traces",
    "draw_trace_poisson",
    "draw_trace_binomial",
    "simulate_particles",
    "measure_ber",
    "empirical_threshold_sweep",
    "__version__",
]
