"""Single-link simulation: Faraday-mirror polarization algebra and a
weak-coherent decoy BB84 channel model with Monte Carlo sessions."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .decoy import STATES, ObservedStatistics, ProtocolParams, StateStatistics

FOUR_FIBER = "four-fiber"
SINGLE_FIBER = "single-fiber"

_SIGMA_Z = np.diag([1.0, -1.0]).astype(complex)


# --- polarization -----------------------------------------------------------

def faraday_mirror_jones() -> np.ndarray:
    return np.array([[0, -1], [-1, 0]], dtype=complex)


def _check_unitary_up_to_loss(t: np.ndarray, tol: float) -> None:
    if t.shape != (2, 2):
        raise ValueError(f"Jones matrix must be 2x2, got {t.shape}")
    gram = t.conj().T @ t
    scale = gram[0, 0].real
    if scale <= 0 or np.max(np.abs(gram - scale * np.eye(2))) > tol * max(scale, 1.0):
        raise ValueError("channel Jones matrix is not unitary (up to a scalar loss)")


def reverse_jones(t: np.ndarray) -> np.ndarray:
    """Jones matrix of the same reciprocal element traversed backwards.

    Expressed in the mirror-image frame (y axis flipped on reflection), the
    return path of a reciprocal element ``t`` is ``sz @ t.T @ sz``.
    """
    t = np.asarray(t, dtype=complex)
    return _SIGMA_Z @ t.T @ _SIGMA_Z


def roundtrip_jones(t: np.ndarray, mirror: np.ndarray | None = None, tol: float = 1e-10) -> np.ndarray:
    """Forward pass through ``t``, reflection off ``mirror``, return pass.

    With the default Faraday mirror the result is ``det(t) * FM`` whatever
    the birefringence of ``t``.
    """
    t = np.asarray(t, dtype=complex)
    _check_unitary_up_to_loss(t, tol)
    fm = faraday_mirror_jones() if mirror is None else np.asarray(mirror, dtype=complex)
    return reverse_jones(t) @ fm @ t


def return_overlap(state_in: np.ndarray, state_out: np.ndarray) -> float:
    """Overlap magnitude between a launched state and the returning state.

    The returning wave propagates the other way and is written in the
    mirrored frame, so the comparison is the bilinear pairing
    ``in^T sz out`` rather than the Hermitian one.  Zero means orthogonal.
    """
    a = np.asarray(state_in, dtype=complex)
    b = np.asarray(state_out, dtype=complex)
    return float(abs(a @ _SIGMA_Z @ b) / (np.linalg.norm(a) * np.linalg.norm(b)))


def birefringent_fiber(n_segments: int, rng: np.random.Generator) -> np.ndarray:
    """Random fiber as a cascade of rotated linear retarders."""
    t = np.eye(2, dtype=complex)
    for _ in range(n_segments):
        theta = rng.uniform(0, np.pi)
        delta = rng.uniform(0, 2 * np.pi)
        c, s = math.cos(theta), math.sin(theta)
        rot = np.array([[c, -s], [s, c]], dtype=complex)
        ret = np.diag([np.exp(1j * delta / 2), np.exp(-1j * delta / 2)])
        t = rot @ ret @ rot.T @ t
    return t


# --- channel model ------------------------------------------------------------

@dataclass(frozen=True)
class ChannelModel:
    length_km: float = 0.0
    attenuation_db: float = 0.0
    scheme: str = FOUR_FIBER
    crosstalk_noise_prob: float = 0.0

    def __post_init__(self):
        if self.attenuation_db < 0:
            raise ValueError("attenuation must be non-negative")
        if self.scheme not in (FOUR_FIBER, SINGLE_FIBER):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 <= self.crosstalk_noise_prob <= 1:
            raise ValueError("crosstalk probability outside [0, 1]")
        if self.scheme == FOUR_FIBER and self.crosstalk_noise_prob != 0:
            raise ValueError("four-fiber links carry no crosstalk noise")


@dataclass(frozen=True)
class DetectorModel:
    efficiency: float = 0.10
    dark_count_prob: float = 1e-6
    vacuum_error_rate: float = 0.5

    def __post_init__(self):
        for name in ("efficiency", "dark_count_prob", "vacuum_error_rate"):
            if not 0 <= getattr(self, name) <= 1:
                raise ValueError(f"{name} outside [0, 1]")


@dataclass(frozen=True)
class InterferometerModel:
    visibility: float = 0.9867

    def __post_init__(self):
        if not 0 < self.visibility <= 1:
            raise ValueError("visibility must be in (0, 1]")

    @property
    def misalignment_error(self) -> float:
        return (1 - self.visibility) / 2


@dataclass(frozen=True)
class LinkModel:
    """Everything needed to predict or sample one link's statistics.

    ``intensity_factors`` and ``misalignment_overrides`` are keyed by state
    name and let a calibrated model follow per-intensity deviations of a real
    transmitter (e.g. a decoy level that is not exactly nominal).
    ``vacuum_extinction_db`` adds the residual light of a finite-extinction
    modulator to the vacuum state; ``None`` means an ideal vacuum.
    """

    channel: ChannelModel = field(default_factory=ChannelModel)
    detector: DetectorModel = field(default_factory=DetectorModel)
    interferometer: InterferometerModel = field(default_factory=InterferometerModel)
    repetition_rate_hz: float = 5e6
    vacuum_extinction_db: float | None = None
    intensity_factors: dict = field(default_factory=dict)
    misalignment_overrides: dict = field(default_factory=dict)

    @property
    def eta(self) -> float:
        return transmittance(self.channel.attenuation_db) * self.detector.efficiency

    @property
    def background_yield(self) -> float:
        return self.detector.dark_count_prob + self.channel.crosstalk_noise_prob

    def launched_intensity(self, state: str, params: ProtocolParams) -> float:
        if state == "vacuum":
            x = 0.0 if self.vacuum_extinction_db is None else params.mu * 10 ** (-self.vacuum_extinction_db / 10)
        else:
            x = params.intensity(state)
        return x * self.intensity_factors.get(state, 1.0)

    def misalignment(self, state: str) -> float:
        return self.misalignment_overrides.get(state, self.interferometer.misalignment_error)


def transmittance(attenuation_db: float) -> float:
    if attenuation_db < 0:
        raise ValueError("attenuation must be non-negative")
    return 10 ** (-attenuation_db / 10)


def _expected_state(link: LinkModel, params: ProtocolParams, state: str) -> tuple[float, float]:
    y0 = link.background_yield
    signal_part = -math.expm1(-link.eta * link.launched_intensity(state, params))
    gain = y0 + signal_part
    if gain == 0:
        return 0.0, 0.0
    errors = link.detector.vacuum_error_rate * y0 + link.misalignment(state) * signal_part
    return min(gain, 1.0), errors / gain


def expected_statistics(link: LinkModel, params: ProtocolParams, n_pulses: float = 1e9) -> ObservedStatistics:
    """Analytic gains and QBERs for ``n_pulses`` split by the intensity mix."""
    probs = params.mix_probabilities
    per_state = []
    for p, state in zip(probs, STATES):
        gain, qber = _expected_state(link, params, state)
        per_state.append(StateStatistics(n_pulses * p, gain, qber))
    return ObservedStatistics(*per_state, duration_s=n_pulses / link.repetition_rate_hz)


# --- Monte Carlo -------------------------------------------------------------

@dataclass(frozen=True)
class SessionEvents:
    """Per-pulse record of one simulated session.

    ``state`` indexes :data:`STATES`; ``error`` flags detections whose bit
    would be wrong in a matching basis.
    """

    state: np.ndarray
    detected: np.ndarray
    error: np.ndarray
    sender_bits: np.ndarray
    sender_bases: np.ndarray
    receiver_bits: np.ndarray
    receiver_bases: np.ndarray
    duration_s: float

    def __len__(self):
        return int(self.state.size)


def simulate_events(link: LinkModel, params: ProtocolParams, n_pulses: int, seed: int) -> SessionEvents:
    if n_pulses <= 0:
        raise ValueError("n_pulses must be positive")
    rng = np.random.default_rng(seed)
    probs = params.mix_probabilities
    state = rng.choice(3, size=n_pulses, p=probs).astype(np.uint8)

    gains = np.empty(3)
    qbers = np.empty(3)
    for i, name in enumerate(STATES):
        gains[i], qbers[i] = _expected_state(link, params, name)

    detected = rng.random(n_pulses) < gains[state]
    error = detected & (rng.random(n_pulses) < qbers[state])
    sender_bits = rng.integers(0, 2, n_pulses, dtype=np.uint8)
    sender_bases = rng.integers(0, 2, n_pulses, dtype=np.uint8)
    receiver_bases = rng.integers(0, 2, n_pulses, dtype=np.uint8)
    random_bits = rng.integers(0, 2, n_pulses, dtype=np.uint8)
    same = sender_bases == receiver_bases
    receiver_bits = np.where(same, sender_bits ^ error.astype(np.uint8), random_bits)
    receiver_bits = np.where(detected, receiver_bits, 0).astype(np.uint8)
    return SessionEvents(
        state, detected, error, sender_bits, sender_bases, receiver_bits, receiver_bases,
        duration_s=n_pulses / link.repetition_rate_hz,
    )


def aggregate_statistics(events: SessionEvents) -> ObservedStatistics:
    per_state = []
    for i in range(3):
        mask = events.state == i
        n = int(mask.sum())
        clicks = int(events.detected[mask].sum())
        errs = int(events.error[mask].sum())
        per_state.append(StateStatistics(n, clicks / n if n else 0.0, errs / clicks if clicks else 0.0))
    return ObservedStatistics(*per_state, duration_s=events.duration_s)


def simulate_session(link: LinkModel, params: ProtocolParams, n_pulses: int, seed: int) -> ObservedStatistics:
    """Sample ``n_pulses`` pulses and return the measured per-state statistics.

    Deterministic for a given seed.  The QBER of each state is the fraction
    of its detections that carry an error flag.
    """
    return aggregate_statistics(simulate_events(link, params, n_pulses, seed))


# --- calibration -------------------------------------------------------------

class CalibrationError(ValueError):
    pass


def calibrate_link(
    target: ObservedStatistics,
    params: ProtocolParams,
    channel: ChannelModel | None = None,
    method: str = "exact",
) -> LinkModel:
    """Fit a :class:`LinkModel` that reproduces a measured record.

    ``method="basic"`` solves only the background yield, total transmittance
    and misalignment from (Q_vac, Q_mu, E_mu), with noise clicks at 50%
    error.  ``method="exact"`` also takes the noise-click error rate from
    E_vac and fits the decoy state's effective intensity and misalignment, so
    the expected gains and QBERs of all three states match the target.

    The channel's attenuation is kept and the detector efficiency absorbs the
    remaining loss; the repetition rate is the record's total pulse rate.
    """
    if method not in ("basic", "exact"):
        raise ValueError(f"unknown calibration method {method!r}")
    channel = channel or ChannelModel()
    s, d, v = target.signal, target.decoy, target.vacuum
    y0 = v.gain
    if s.gain <= y0:
        raise CalibrationError("signal gain does not exceed the vacuum gain; no channel fits")
    eta = -math.log1p(-(s.gain - y0)) / params.mu
    efficiency = eta / transmittance(channel.attenuation_db)
    if efficiency > 1:
        raise CalibrationError(
            f"record needs {efficiency:.3f} receiver efficiency at {channel.attenuation_db} dB"
        )
    e0 = v.qber if method == "exact" else 0.5
    signal_part = s.gain - y0
    mis = (s.qber * s.gain - e0 * y0) / signal_part
    if not 0 <= mis <= 0.5:
        raise CalibrationError(f"fitted misalignment {mis:.4f} outside [0, 0.5]")

    if channel.scheme == SINGLE_FIBER:
        dark = min(DetectorModel().dark_count_prob, y0)
        channel = replace(channel, crosstalk_noise_prob=y0 - dark)
    else:
        dark = y0

    factors, overrides = {}, {}
    if method == "exact":
        decoy_part = d.gain - y0
        if decoy_part <= 0:
            raise CalibrationError("decoy gain does not exceed the vacuum gain")
        factors["decoy"] = -math.log1p(-decoy_part) / (eta * params.nu)
        overrides["decoy"] = (d.qber * d.gain - e0 * y0) / decoy_part
        if not 0 <= overrides["decoy"] <= 0.5:
            raise CalibrationError("fitted decoy misalignment outside [0, 0.5]")

    return LinkModel(
        channel=channel,
        detector=DetectorModel(efficiency=efficiency, dark_count_prob=dark, vacuum_error_rate=e0),
        interferometer=InterferometerModel(visibility=1 - 2 * mis),
        repetition_rate_hz=target.total_pulses / target.duration_s,
        intensity_factors=factors,
        misalignment_overrides=overrides,
    )
