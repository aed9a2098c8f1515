"""Throughput model, configuration optimizer and Monte-Carlo oracle for an
adaptive full-duplex cognitive MAC with a two-stage data phase."""
from .core import (
    AccessConfig, ContentionParams, Mode, PuModel, Scenario, SensingConfig, SicModel,
    ThroughputReport, db_to_linear, linear_to_db, q_function, q_inverse, self_interference,
)
from .contention import ContentionStats, contention_overhead, slot_probabilities, successful_and_collision_durations
from .sensing import (
    Pf00Approximation, SensingOutcomeModel, approx_pf00_and_derivatives, average_detection,
    calibrate_threshold, detection_p01, false_alarm_p00, sensing_model,
)
from .throughput import RateContext, bits_case1, bits_case2, bits_case3, evaluate, normalized_throughput
from .optimizer import (
    OptimizationResult, Theorem1Diagnostics, TsSearchResult, critical_sensing_power, optimize_config,
    optimize_ts, sweep_parameter, verify_theorem1,
)
from .montecarlo import CaseStats, SimConfig, SimReport, simulate
from .manifest import Manifest, load_manifest, parse_manifest
from .cli import BaselineComparison, compare_baselines, run_manifest
from .estimator import FDCMACConfigurator
from .exceptions import (
    ApproximationUnavailable, CalibrationError, ConfigError, DomainError, FdcMacError,
    InfeasibleContentionError, NumericalError,
)

__version__ = "0.1.0"
