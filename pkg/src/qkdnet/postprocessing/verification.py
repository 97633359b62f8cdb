"""Post-reconciliation key comparison."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bits import BitString
from .privacy import toeplitz_hash

VERIFY_HASH_BITS = 64


def verification_tag(bits: np.ndarray, seed: int) -> bytes:
    """64-bit universal hash of ``bits`` under a shared public seed."""
    bits = np.asarray(bits, dtype=np.uint8)
    n = bits.size
    if n == 0:
        return bytes(VERIFY_HASH_BITS // 8)
    rng = np.random.default_rng(seed)
    m = min(VERIFY_HASH_BITS, n)
    padded = bits if m == VERIFY_HASH_BITS else np.concatenate([bits, np.zeros(VERIFY_HASH_BITS - n, np.uint8)])
    key = rng.integers(0, 2, padded.size + VERIFY_HASH_BITS - 1, dtype=np.uint8)
    return np.packbits(toeplitz_hash(padded, key, VERIFY_HASH_BITS)).tobytes()


@dataclass(frozen=True)
class KeyComparison:
    equal: bool
    mismatches: tuple[int, ...] | None = None


def verify_keys(a: BitString, b: BitString, seed: int = 0, full_compare: bool = False) -> KeyComparison:
    """Compare two keys by exchanging 64-bit hash tags.

    With ``full_compare`` (test mode) the bits are also compared directly
    and the differing positions are returned.
    """
    if len(a) != len(b):
        raise ValueError("keys differ in length")
    equal = verification_tag(a.array, seed) == verification_tag(b.array, seed)
    if not full_compare:
        return KeyComparison(equal)
    diff = tuple(int(i) for i in np.flatnonzero(a.array != b.array))
    return KeyComparison(equal and not diff, diff)
