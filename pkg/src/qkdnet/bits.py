"""Length-explicit bit strings backed by numpy."""
from __future__ import annotations

import numpy as np


class BitString:
    """Immutable sequence of bits.

    Bits are held unpacked (one ``uint8`` per bit) for fast vectorised work;
    :meth:`to_bytes` packs them MSB-first and zeroes the padding of the final
    byte, so the length always travels alongside the payload.
    """

    __slots__ = ("_bits",)

    def __init__(self, bits=()):
        arr = np.asarray(bits, dtype=np.uint8)
        if arr.ndim != 1:
            raise ValueError("bits must be one-dimensional")
        if arr.size and arr.max() > 1:
            raise ValueError("bits must be 0 or 1")
        arr = arr.copy()
        arr.flags.writeable = False
        self._bits = arr

    @classmethod
    def zeros(cls, n: int) -> "BitString":
        return cls(np.zeros(n, dtype=np.uint8))

    @classmethod
    def random(cls, n: int, rng: np.random.Generator) -> "BitString":
        return cls(rng.integers(0, 2, size=n, dtype=np.uint8))

    @classmethod
    def from_bytes(cls, data: bytes, length: int) -> "BitString":
        if length > 8 * len(data):
            raise ValueError(f"{len(data)} bytes cannot hold {length} bits")
        unpacked = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        return cls(unpacked[:length])

    @classmethod
    def from_int(cls, value: int, length: int) -> "BitString":
        if value < 0 or value >> length:
            raise ValueError(f"{value} does not fit in {length} bits")
        return cls([(value >> (length - 1 - i)) & 1 for i in range(length)])

    @property
    def array(self) -> np.ndarray:
        """Read-only ``uint8`` view of the bits."""
        return self._bits

    def to_bytes(self) -> bytes:
        return np.packbits(self._bits).tobytes()

    def to_int(self) -> int:
        return int.from_bytes(self.to_bytes(), "big") >> (-len(self) % 8) if len(self) else 0

    def __len__(self) -> int:
        return int(self._bits.size)

    def __getitem__(self, item):
        if isinstance(item, slice):
            return BitString(self._bits[item])
        return int(self._bits[item])

    def __xor__(self, other: "BitString") -> "BitString":
        if len(self) != len(other):
            raise ValueError("length mismatch")
        return BitString(self._bits ^ other._bits)

    def __add__(self, other: "BitString") -> "BitString":
        return BitString(np.concatenate([self._bits, other._bits]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, BitString):
            return NotImplemented
        return len(self) == len(other) and bool(np.array_equal(self._bits, other._bits))

    def __hash__(self) -> int:
        return hash((len(self), self.to_bytes()))

    def __repr__(self) -> str:
        if len(self) <= 32:
            return f"BitString('{''.join(map(str, self._bits.tolist()))}')"
        return f"BitString(<{len(self)} bits>)"
