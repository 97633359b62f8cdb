"""Per node-pair stores of distilled secret key."""
from __future__ import annotations

import threading
from collections import deque

import numpy as np

from ..bits import BitString
from ..postprocessing import SecretKeyBlock


class KeyStarvationError(RuntimeError):
    def __init__(self, message, pair=None, needed=0, available=0):
        super().__init__(message)
        self.pair = pair
        self.needed = needed
        self.available = available


class KeyReuseError(RuntimeError):
    pass


def pair_key(a: str, b: str) -> frozenset:
    if a == b:
        raise ValueError("a key pool needs two distinct nodes")
    return frozenset((a, b))


class KeyPool:
    """FIFO of secret bits shared by the two nodes of a pair.

    Both ends hold identical material.  :meth:`withdraw` removes bits from
    the head at one end and issues them under a fresh block id; the peer
    picks up the same bits exactly once with :meth:`claim`.
    """

    def __init__(self, a: str, b: str, low_water_bits: int = 0):
        self.pair = pair_key(a, b)
        self.low_water_bits = low_water_bits
        self._blocks: deque[np.ndarray] = deque()
        self._available = 0
        self._issued: dict[int, SecretKeyBlock] = {}
        self._claimed: set[int] = set()
        self._next_id = 1
        self.produced_bits = 0
        self.consumed_bits = 0
        self._lock = threading.Lock()

    def __repr__(self):
        return f"KeyPool({'-'.join(sorted(self.pair))}, {self._available} bits)"

    @property
    def available_bits(self) -> int:
        return self._available

    @property
    def below_low_water(self) -> bool:
        return self._available < self.low_water_bits

    def deposit(self, block: SecretKeyBlock) -> None:
        if block.source_pair is not None and frozenset(block.source_pair) != self.pair:
            raise ValueError(f"block for {block.source_pair} deposited in pool {sorted(self.pair)}")
        with self._lock:
            if len(block):
                self._blocks.append(block.bits.array)
            self._available += len(block)
            self.produced_bits += len(block)

    def withdraw(self, n_bits: int) -> SecretKeyBlock:
        if n_bits <= 0:
            raise ValueError("withdraw a positive number of bits")
        with self._lock:
            if n_bits > self._available:
                raise KeyStarvationError(
                    f"pool {'-'.join(sorted(self.pair))} holds {self._available} bits, {n_bits} needed",
                    self.pair, n_bits, self._available,
                )
            parts, need = [], n_bits
            while need:
                head = self._blocks[0]
                if head.size <= need:
                    parts.append(self._blocks.popleft())
                    need -= head.size
                else:
                    parts.append(head[:need])
                    self._blocks[0] = head[need:]
                    need = 0
            self._available -= n_bits
            self.consumed_bits += n_bits
            block = SecretKeyBlock(BitString(np.concatenate(parts)), tuple(sorted(self.pair)), self._next_id)
            self._issued[block.block_id] = block
            self._next_id += 1
            return block

    def claim(self, block_id: int) -> SecretKeyBlock:
        with self._lock:
            if block_id in self._claimed:
                raise KeyReuseError(f"key block {block_id} of {sorted(self.pair)} already consumed")
            try:
                block = self._issued.pop(block_id)
            except KeyError:
                raise KeyError(f"unknown key block {block_id}") from None
            self._claimed.add(block_id)
            return block
