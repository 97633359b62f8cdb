"""Decoy-state single-photon bounds and GLLP-style secure key rates.

The estimator works on weak+vacuum decoy statistics: a signal intensity
``mu``, a weaker decoy ``nu`` and a (nominal) vacuum state.  All functions
are pure.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

STATES = ("signal", "decoy", "vacuum")

#: Confidence multiplier of the fluctuation bounds on measured gains.
FLUCTUATION_SIGMAS = 10.0


class NoSecureKeyError(ValueError):
    """Raised when the observed data admit no positive single-photon bound."""


@dataclass(frozen=True)
class ProtocolParams:
    mu: float = 0.6
    nu: float = 0.2
    q_sift: float = 0.5
    f_ec: float = 1.2
    mix: tuple[float, float, float] = (6.0, 3.0, 1.0)

    def __post_init__(self):
        if not 0 < self.nu < self.mu:
            raise ValueError(f"need 0 < nu < mu, got mu={self.mu}, nu={self.nu}")
        if not 0 < self.q_sift <= 1:
            raise ValueError(f"q_sift must be in (0, 1], got {self.q_sift}")
        if self.f_ec < 1:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec}")
        mix = tuple(float(m) for m in self.mix)
        if len(mix) != 3 or any(m < 0 for m in mix) or mix[0] <= 0:
            raise ValueError(f"mix must be three non-negative weights with signal > 0, got {self.mix}")
        object.__setattr__(self, "mix", mix)

    @property
    def mix_probabilities(self) -> np.ndarray:
        w = np.asarray(self.mix, dtype=float)
        return w / w.sum()

    def intensity(self, state: str) -> float:
        return {"signal": self.mu, "decoy": self.nu, "vacuum": 0.0}[state]


@dataclass(frozen=True)
class StateStatistics:
    """Counts for one intensity class: pulses sent, gain and QBER."""

    n_pulses: float
    gain: float
    qber: float

    def __post_init__(self):
        if self.n_pulses < 0:
            raise ValueError(f"negative pulse count {self.n_pulses}")
        if not 0 <= self.gain <= 1:
            raise ValueError(f"gain {self.gain} outside [0, 1]")
        if not 0 <= self.qber <= 1:
            raise ValueError(f"QBER {self.qber} outside [0, 1]")


@dataclass(frozen=True)
class ObservedStatistics:
    signal: StateStatistics
    decoy: StateStatistics
    vacuum: StateStatistics
    duration_s: float

    def __post_init__(self):
        if self.duration_s <= 0:
            raise ValueError(f"duration must be positive, got {self.duration_s}")

    def state(self, name: str) -> StateStatistics:
        return getattr(self, name)

    @property
    def total_pulses(self) -> float:
        return self.signal.n_pulses + self.decoy.n_pulses + self.vacuum.n_pulses

    @property
    def signal_pulse_rate_hz(self) -> float:
        return self.signal.n_pulses / self.duration_s

    def validate(self) -> "ObservedStatistics":
        """Strict checks for field records; returns ``self``.

        Gains must lie in (0, 1] and counts must be positive.  An unusual
        gain ordering only warns.
        """
        for name in STATES:
            s = self.state(name)
            if s.n_pulses <= 0:
                raise ValueError(f"{name}: pulse count must be positive")
            if not 0 < s.gain <= 1:
                raise ValueError(f"{name}: gain {s.gain} outside (0, 1]")
        if not self.signal.gain > self.decoy.gain > self.vacuum.gain:
            warnings.warn(
                "gains are not ordered signal > decoy > vacuum", RuntimeWarning, stacklevel=2
            )
        return self


@dataclass(frozen=True)
class RateEstimate:
    q1_lower: float
    e1_upper: float
    r_per_signal_pulse: float
    signal_pulse_rate_hz: float
    final_rate_bps: float
    sifted_rate_bps: float
    gain_bounds: dict = field(default_factory=dict)
    diagnostic: str | None = None

    @property
    def secure(self) -> bool:
        return self.final_rate_bps > 0


def binary_entropy(x: float) -> float:
    if not 0 <= x <= 1:
        raise ValueError(f"binary entropy undefined at {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def finite_statistic_bounds(gain: float, n_pulses: float) -> tuple[float, float]:
    if gain <= 0 or n_pulses <= 0:
        raise ValueError("gain and n_pulses must be positive")
    half = FLUCTUATION_SIGMAS / math.sqrt(n_pulses * gain)
    return max(0.0, gain * (1 - half)), gain * (1 + half)


def _single_photon_gain(q_mu, q_nu, q_vac, mu, nu):
    bracket = (
        q_nu * math.exp(nu)
        - q_mu * math.exp(mu) * nu**2 / mu**2
        - (mu**2 - nu**2) / mu**2 * q_vac
    )
    if bracket <= 0:
        raise NoSecureKeyError(
            f"single-photon gain bound is non-positive (bracket={bracket:.3e})"
        )
    return mu**2 * math.exp(-mu) / (mu * nu - nu**2) * bracket


def _single_photon_error(eq_mu, eq_nu, q1, mu, nu):
    if q1 <= 0:
        raise ValueError("q1_lower must be positive")
    numerator = eq_mu * math.exp(mu) - eq_nu * math.exp(nu)
    if numerator < 0:
        raise NoSecureKeyError(
            f"single-photon error bound has negative numerator ({numerator:.3e})"
        )
    e1 = mu * math.exp(-mu) / (mu - nu) * numerator / q1
    if e1 > 0.5:
        raise NoSecureKeyError(f"single-photon error bound {e1:.4f} exceeds 0.5")
    return e1


def q1_lower_bound(stats: ObservedStatistics, params: ProtocolParams) -> float:
    """Lower bound on the single-photon gain from the three measured gains.

    The result is capped at the signal gain.  Raises
    :class:`NoSecureKeyError` when the data give no positive bound.
    """
    q1 = _single_photon_gain(
        stats.signal.gain, stats.decoy.gain, stats.vacuum.gain, params.mu, params.nu
    )
    return min(q1, stats.signal.gain)


def e1_upper_bound(stats: ObservedStatistics, params: ProtocolParams, q1_lower: float) -> float:
    """Upper bound on the single-photon error rate.

    Uses the decoy-state error product rather than the vacuum term, since an
    imperfect intensity modulator leaves the nominal vacuum state non-empty.
    """
    return _single_photon_error(
        stats.signal.qber * stats.signal.gain,
        stats.decoy.qber * stats.decoy.gain,
        q1_lower,
        params.mu,
        params.nu,
    )


def _pessimistic_bounds(stats: ObservedStatistics, params: ProtocolParams) -> tuple[float, float]:
    s, d, v = stats.signal, stats.decoy, stats.vacuum
    q_nu_lo, _ = finite_statistic_bounds(d.gain, d.n_pulses)
    _, q_vac_hi = finite_statistic_bounds(v.gain, v.n_pulses)
    q1 = min(_single_photon_gain(s.gain, q_nu_lo, q_vac_hi, params.mu, params.nu), s.gain)
    eq_mu = s.qber * s.gain
    eq_nu = d.qber * d.gain
    eq_mu_hi = finite_statistic_bounds(eq_mu, s.n_pulses)[1] if eq_mu > 0 else 0.0
    eq_nu_lo = finite_statistic_bounds(eq_nu, d.n_pulses)[0] if eq_nu > 0 else 0.0
    e1 = _single_photon_error(eq_mu_hi, eq_nu_lo, q1, params.mu, params.nu)
    return q1, e1


def key_rate(
    stats: ObservedStatistics, params: ProtocolParams, pessimistic: bool = False
) -> RateEstimate:
    """Secure key rate per signal pulse and per second.

    With ``pessimistic=True`` the decoy and vacuum gains (and the error
    products) are replaced by their fluctuation bounds before the
    single-photon estimates are formed.  A record that admits no secure key
    yields a zero final rate with the reason in ``diagnostic``.
    """
    pulse_rate = stats.signal_pulse_rate_hz
    sifted = params.q_sift * stats.signal.gain * pulse_rate
    bounds = {}
    for name in STATES:
        s = stats.state(name)
        if s.gain > 0 and s.n_pulses > 0:
            bounds[name] = finite_statistic_bounds(s.gain, s.n_pulses)

    # a refused record reports r = 0, never a negative rate
    def refused(reason, q1=0.0, e1=float("nan")):
        return RateEstimate(q1, e1, 0.0, pulse_rate, 0.0, sifted, bounds, reason)

    try:
        if pessimistic:
            q1, e1 = _pessimistic_bounds(stats, params)
        else:
            q1 = q1_lower_bound(stats, params)
            e1 = e1_upper_bound(stats, params, q1)
    except NoSecureKeyError as exc:
        return refused(str(exc))

    e_mu = stats.signal.qber
    if e_mu > 0.5:
        return refused(f"signal QBER {e_mu} exceeds 0.5", q1, e1)
    leak = stats.signal.gain * params.f_ec * binary_entropy(e_mu)
    r = params.q_sift * (-leak + q1 * (1 - binary_entropy(e1)))
    if r <= 0:
        return refused(f"error-correction cost exceeds single-photon secrecy (r={r:.3e})", q1, e1)
    return RateEstimate(q1, e1, r, pulse_rate, r * pulse_rate, sifted, bounds)
