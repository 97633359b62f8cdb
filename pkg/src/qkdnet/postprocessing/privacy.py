"""Toeplitz-matrix hashing over GF(2)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bits import BitString


def toeplitz_hash(bits: np.ndarray, seed: np.ndarray, out_len: int) -> np.ndarray:
    """Multiply ``bits`` by the ``out_len x n`` Toeplitz matrix defined by ``seed``.

    Entry ``(i, j)`` of the matrix is ``seed[i - j + n - 1]``, so the seed
    fills the first row (reversed) and the first column.  The product is a
    slice of a full convolution, evaluated with FFTs for large inputs.
    """
    bits = np.asarray(bits, dtype=np.uint8)
    seed = np.asarray(seed, dtype=np.uint8)
    n = bits.size
    if out_len < 0:
        raise ValueError("negative output length")
    if out_len > n:
        raise ValueError(f"cannot extract {out_len} bits from {n}")
    if out_len == 0:
        return np.zeros(0, dtype=np.uint8)
    if seed.size != n + out_len - 1:
        raise ValueError(f"seed must have {n + out_len - 1} bits, got {seed.size}")
    if n * out_len <= 1 << 16:
        window = np.lib.stride_tricks.sliding_window_view(seed, n)[:out_len, ::-1]
        return (window.astype(np.int64) @ bits.astype(np.int64) & 1).astype(np.uint8)
    size = 1 << int(np.ceil(np.log2(seed.size + n - 1)))
    conv = np.fft.irfft(np.fft.rfft(seed, size) * np.fft.rfft(bits, size), size)
    counts = np.rint(conv[n - 1 : n - 1 + out_len]).astype(np.int64)
    return (counts & 1).astype(np.uint8)


@dataclass(frozen=True)
class SecretKeyBlock:
    bits: BitString
    source_pair: tuple[str, str] | None = None
    block_id: int = 0

    def __len__(self):
        return len(self.bits)


def privacy_amplify(
    bits: BitString,
    hash_seed: BitString,
    out_len: int,
    source_pair: tuple[str, str] | None = None,
    block_id: int = 0,
) -> SecretKeyBlock:
    if out_len > len(bits):
        raise ValueError(f"output length {out_len} exceeds input length {len(bits)}")
    out = toeplitz_hash(bits.array, hash_seed.array, out_len)
    return SecretKeyBlock(BitString(out), source_pair, block_id)
