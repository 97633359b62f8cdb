"""Simulation and analysis of a hierarchical decoy-state QKD network."""
from .bits import BitString
from .decoy import (
    NoSecureKeyError,
    ObservedStatistics,
    ProtocolParams,
    RateEstimate,
    StateStatistics,
    binary_entropy,
    e1_upper_bound,
    finite_statistic_bounds,
    key_rate,
    q1_lower_bound,
)
from .records import field_records, load_measurement_records, write_measurement_records

__version__ = "0.1.0"
