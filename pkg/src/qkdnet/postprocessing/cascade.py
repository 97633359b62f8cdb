"""Cascade interactive error reconciliation.

The sender only ever answers parity queries about its own key; every
answer is appended to a transcript, so leakage is counted exactly.
"""
from __future__ import annotations

import heapq
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from ..bits import BitString
from .sifting import SiftedKeyPair
from .verification import VERIFY_HASH_BITS, verification_tag

DEFAULT_PASSES = 4
MAX_QBER = 0.15


class ReconciliationError(RuntimeError):
    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


@dataclass(frozen=True)
class ParityMessage:
    pass_index: int
    start: int
    end: int
    parity: int


_HEADER = struct.Struct(">4sI")
_RECORD = struct.Struct(">BIIB")
_MAGIC = b"CSCD"


def encode_transcript(messages) -> bytes:
    """Binary framing: ``b"CSCD"``, a u32 record count, then one 10-byte
    big-endian record per message (u8 pass, u32 start, u32 end, u8 parity)."""
    out = [_HEADER.pack(_MAGIC, len(messages))]
    out.extend(_RECORD.pack(m.pass_index, m.start, m.end, m.parity) for m in messages)
    return b"".join(out)


def decode_transcript(data: bytes) -> list[ParityMessage]:
    magic, count = _HEADER.unpack_from(data, 0)
    if magic != _MAGIC:
        raise ValueError("not a Cascade transcript")
    if len(data) != _HEADER.size + count * _RECORD.size:
        raise ValueError("truncated transcript")
    return [
        ParityMessage(*_RECORD.unpack_from(data, _HEADER.size + i * _RECORD.size))
        for i in range(count)
    ]


@dataclass
class ReconciliationResult:
    corrected_bits: BitString
    bits_leaked: int
    passes_run: int
    verification_bits: int = 0
    transcript: list = field(default_factory=list, repr=False)


class _ParityResponder:
    """Sender side: holds the true key, answers range-parity queries."""

    def __init__(self, bits: np.ndarray):
        self._bits = bits
        self._views: list[np.ndarray] = []
        self.transcript: list[ParityMessage] = []

    def add_pass(self, perm: np.ndarray) -> None:
        self._views.append(self._bits[perm])

    def block_parities(self, p: int, k: int) -> np.ndarray:
        view = self._views[p]
        starts = np.arange(0, view.size, k)
        par = np.add.reduceat(view, starts) & 1
        ends = np.minimum(starts + k, view.size)
        self.transcript.extend(
            ParityMessage(p, int(s), int(e), int(x)) for s, e, x in zip(starts, ends, par)
        )
        return par.astype(np.uint8)

    def parity(self, p: int, start: int, end: int) -> int:
        x = int(self._views[p][start:end].sum() & 1)
        self.transcript.append(ParityMessage(p, start, end, x))
        return x


def first_block_size(qber: float) -> int:
    return max(1, math.ceil(0.73 / qber))


def cascade_reconcile(
    pair: SiftedKeyPair,
    seed: int = 0,
    passes: int = DEFAULT_PASSES,
    early_stop: bool = True,
    min_length: int = 64,
) -> ReconciliationResult:
    """Correct the receiver's key towards the sender's.

    Pass ``i`` uses blocks of ``k1 * 2**i`` bits (``k1 = ceil(0.73/qber)``)
    under a public random permutation (identity for the first pass).  Every
    corrected bit re-opens the blocks that contain it in earlier passes,
    which are then searched smallest first.

    After each pass but the last a 64-bit verification tag is compared when
    ``early_stop`` is set, and the protocol ends once the tags agree.  A tag
    mismatch after the final pass raises :class:`ReconciliationError`.
    Tag bits are reported in ``verification_bits``, separately from the
    parity leakage in ``bits_leaked``.
    """
    n = len(pair)
    q = pair.estimated_qber
    if n < min_length:
        raise ValueError(f"need at least {min_length} bits, got {n}")
    if not 0 < q <= MAX_QBER:
        raise ValueError(f"estimated QBER {q} outside (0, {MAX_QBER}]")

    rng = np.random.default_rng(seed)
    alice = _ParityResponder(pair.sender_bits.array)
    bob = pair.receiver_bits.array.copy()
    k1 = first_block_size(q)

    perms, pos, views, sizes, diffs = [], [], [], [], []
    heap: list[tuple[int, int, int]] = []
    verify_bits = 0
    tag_seeds = rng.integers(0, 2**63, size=passes)

    def flip(i: int) -> None:
        bob[i] ^= 1
        for p in range(len(perms)):
            j = pos[p][i]
            views[p][j] ^= 1
            b = j // sizes[p]
            diffs[p][b] ^= 1
            if diffs[p][b]:
                heapq.heappush(heap, (sizes[p], p, b))

    def search(p: int, b: int) -> None:
        view, k = views[p], sizes[p]
        lo, hi = b * k, min(b * k + k, n)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if alice.parity(p, lo, mid) != (int(view[lo:mid].sum()) & 1):
                hi = mid
            else:
                lo = mid
        flip(int(perms[p][lo]))

    def tags_match(tag_seed) -> bool:
        nonlocal verify_bits
        verify_bits += VERIFY_HASH_BITS
        return verification_tag(bob, tag_seed) == verification_tag(pair.sender_bits.array, tag_seed)

    passes_run = 0
    confirmed = False
    for p in range(passes):
        perm = np.arange(n) if p == 0 else rng.permutation(n)
        k = min(k1 << p, n)
        inverse = np.empty(n, dtype=np.int64)
        inverse[perm] = np.arange(n)
        alice.add_pass(perm)
        perms.append(perm)
        pos.append(inverse)
        views.append(bob[perm])
        sizes.append(k)
        a_par = alice.block_parities(p, k)
        b_par = np.add.reduceat(views[p], np.arange(0, n, k)) & 1
        diffs.append((a_par ^ b_par).astype(np.uint8))
        for b in np.flatnonzero(diffs[p]):
            heapq.heappush(heap, (k, p, int(b)))
        while heap:
            _, bp, b = heapq.heappop(heap)
            if diffs[bp][b]:
                search(bp, b)
        passes_run = p + 1
        if early_stop and p < passes - 1 and tags_match(int(tag_seeds[p])):
            confirmed = True
            break
    if not confirmed:
        confirmed = tags_match(int(tag_seeds[-1]))

    result = ReconciliationResult(
        BitString(bob), len(alice.transcript), passes_run, verify_bits, alice.transcript
    )
    if not confirmed:
        raise ReconciliationError(
            f"residual errors remain after {passes_run} passes (verification tag mismatch)", result
        )
    return result
