"""Basis sifting of detection records."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bits import BitString


@dataclass(frozen=True)
class SiftedKeyPair:
    sender_bits: BitString
    receiver_bits: BitString
    estimated_qber: float

    def __post_init__(self):
        if len(self.sender_bits) != len(self.receiver_bits):
            raise ValueError("sifted keys differ in length")
        if not 0 <= self.estimated_qber <= 0.5:
            raise ValueError(f"estimated QBER {self.estimated_qber} outside [0, 0.5]")

    def __len__(self):
        return len(self.sender_bits)


def sift(
    sender_bits,
    sender_bases,
    receiver_bits,
    receiver_bases,
    detected,
    keep=None,
    qber_estimate: float | None = None,
) -> SiftedKeyPair:
    """Keep positions that were detected and measured in the sender's basis.

    ``keep`` optionally restricts the result further (e.g. to signal-state
    pulses).  Without ``qber_estimate`` the pair carries the observed
    disagreement rate, which only a simulator can know.
    """
    arrays = [np.asarray(x) for x in (sender_bits, sender_bases, receiver_bits, receiver_bases, detected)]
    if keep is not None:
        arrays.append(np.asarray(keep))
    if len({a.shape for a in arrays}) != 1:
        raise ValueError("event streams are not index-aligned")
    sb, sbase, rb, rbase, det = arrays[:5]
    mask = det.astype(bool) & (sbase == rbase)
    if keep is not None:
        mask &= arrays[5].astype(bool)
    a = BitString(sb[mask])
    b = BitString(rb[mask])
    if qber_estimate is None:
        qber_estimate = float(np.mean(a.array != b.array)) if len(a) else 0.0
    return SiftedKeyPair(a, b, min(qber_estimate, 0.5))
