"""Final key length after privacy amplification."""
from __future__ import annotations

import math

from ..decoy import ObservedStatistics, ProtocolParams, RateEstimate, binary_entropy


def _single_photon_fraction(estimate: RateEstimate, stats: ObservedStatistics) -> float:
    if not estimate.q1_lower > 0 or math.isnan(estimate.e1_upper):
        return 0.0
    return estimate.q1_lower / stats.signal.gain * (1 - binary_entropy(estimate.e1_upper))


def final_length(
    n_sifted_signal: int, estimate: RateEstimate, stats: ObservedStatistics, params: ProtocolParams
) -> int:
    """Secure length of ``n_sifted_signal`` sifted bits with the nominal
    error-correction cost ``f_ec * H2(E_mu)`` per bit; never negative."""
    per_bit = -params.f_ec * binary_entropy(stats.signal.qber) + _single_photon_fraction(estimate, stats)
    return max(0, math.floor(n_sifted_signal * per_bit))


def live_final_length(
    n_sifted_signal: int, leaked_bits: int, estimate: RateEstimate, stats: ObservedStatistics
) -> int:
    """Secure length when the reconciliation leakage was actually measured."""
    secret = n_sifted_signal * _single_photon_fraction(estimate, stats)
    return max(0, math.floor(secret) - leaked_bits)
