"""AES-128 messaging keyed from the QKD pools.

Frames are authenticated with AES-GCM.  Wire layout, all integers
big-endian::

    session_id u64 | key_block_id u64 | sequence u64 | length u32 | ciphertext | tag[16]

The 28-byte header is the associated data; the GCM nonce is four zero bytes
followed by the sequence number, unique because sequence numbers strictly
increase within a session and a key never leaves its session.
"""
from __future__ import annotations

import itertools
import struct
import time
from dataclasses import dataclass, field
from typing import Callable

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .network.keypool import KeyPool, KeyReuseError, KeyStarvationError
from .network.orchestration import Network
from .network.relay import InsufficientKeyError, RelayPath

KEY_BITS = 128
TAG_BYTES = 16
HEADER = struct.Struct(">QQQI")

PER_MESSAGE = "per-message"
PER_BYTES = "per-bytes"
PER_INTERVAL = "per-interval"


class FrameError(ValueError):
    pass


class IntegrityError(FrameError):
    pass


class ReplayError(FrameError):
    pass


class UnknownKeyError(FrameError):
    pass


@dataclass(frozen=True)
class RefreshPolicy:
    kind: str = PER_MESSAGE
    limit: float = 0

    def __post_init__(self):
        if self.kind not in (PER_MESSAGE, PER_BYTES, PER_INTERVAL):
            raise ValueError(f"unknown refresh policy {self.kind!r}")
        if self.kind != PER_MESSAGE and self.limit <= 0:
            raise ValueError(f"{self.kind} refresh needs a positive limit")


@dataclass(frozen=True)
class MessageFrame:
    session_id: int
    key_block_id: int
    sequence: int
    ciphertext: bytes
    tag: bytes

    @property
    def header(self) -> bytes:
        return HEADER.pack(self.session_id, self.key_block_id, self.sequence, len(self.ciphertext))

    def to_bytes(self) -> bytes:
        return self.header + self.ciphertext + self.tag

    @classmethod
    def from_bytes(cls, data: bytes) -> "MessageFrame":
        if len(data) < HEADER.size + TAG_BYTES:
            raise FrameError("frame too short")
        sid, kid, seq, length = HEADER.unpack_from(data)
        if len(data) != HEADER.size + length + TAG_BYTES:
            raise FrameError("frame length field does not match payload")
        body = data[HEADER.size:]
        return cls(sid, kid, seq, body[:length], body[length:])


def _nonce(sequence: int) -> bytes:
    return b"\x00" * 4 + sequence.to_bytes(8, "big")


_session_ids = itertools.count(1)


@dataclass
class SecureSession:
    """One direction of an encrypted conversation between two nodes.

    Keys come from ``pool``, refilled from ``relay`` when the pair has no
    direct link.  The receiving side claims each key block from the pool by
    the id carried in the frame header.
    """

    sender: str
    receiver: str
    pool: KeyPool
    policy: RefreshPolicy = field(default_factory=RefreshPolicy)
    relay: RelayPath | None = None
    network: Network | None = None
    clock: Callable[[], float] = time.monotonic
    session_id: int = field(default_factory=lambda: next(_session_ids))
    suspended: bool = False
    key_block_id: int | None = None
    _key: bytes | None = field(default=None, repr=False)
    _key_bytes: int = 0
    _key_time: float = 0.0
    _next_seq: int = 1
    used_block_ids: list[int] = field(default_factory=list)
    # receiver side
    _rx_keys: dict[int, bytes] = field(default_factory=dict, repr=False)
    _rx_last_seq: int = 0
    frames_sent: int = 0
    frames_received: int = 0

    @property
    def bits_consumed(self) -> int:
        return KEY_BITS * len(self.used_block_ids)

    def _refresh(self) -> None:
        try:
            if self.pool.available_bits < KEY_BITS and self.relay is not None and self.network is not None:
                self.network.relay_refill(self.relay, KEY_BITS)
            block = self.pool.withdraw(KEY_BITS)
        except (KeyStarvationError, InsufficientKeyError) as exc:
            self.suspended = True
            raise KeyStarvationError(
                f"session {self.session_id} {self.sender}->{self.receiver} suspended: {exc}",
                self.pool.pair, KEY_BITS, self.pool.available_bits,
            ) from exc
        if self.network is not None:
            self.network.ledger.record("consume", self.pool.pair, KEY_BITS, f"session {self.session_id}")
        self.key_block_id = block.block_id
        self._key = block.bits.to_bytes()
        self._key_bytes = 0
        self._key_time = self.clock()
        self.used_block_ids.append(block.block_id)

    def _needs_refresh(self, incoming: int) -> bool:
        if self._key is None:
            return True
        kind = self.policy.kind
        if kind == PER_MESSAGE:
            return True
        if kind == PER_BYTES:
            return self._key_bytes >= self.policy.limit
        return self.clock() - self._key_time >= self.policy.limit


def open_session(network: Network, sender: str, receiver: str, policy: RefreshPolicy | None = None, clock=None) -> SecureSession:
    """Open a session, routing through trusted relays if there is no direct link.

    The first 128-bit key is drawn immediately, so an empty pool fails here.
    """
    topo = network.topology
    path = topo.relay_path(sender, receiver)
    if len(path.nodes) == 2:
        pool, relay = network.pool(sender, receiver), None
    else:
        pool, relay = network.end_to_end_pool(sender, receiver), path
    session = SecureSession(
        sender, receiver, pool, policy or RefreshPolicy(), relay, network,
        **({"clock": clock} if clock else {}),
    )
    session._refresh()
    return session


def encrypt_message(session: SecureSession, plaintext: bytes) -> MessageFrame:
    if session.suspended:
        raise KeyStarvationError(f"session {session.session_id} is suspended")
    if session.frames_sent and session._needs_refresh(len(plaintext)):
        session._refresh()
    seq = session._next_seq
    header = HEADER.pack(session.session_id, session.key_block_id, seq, len(plaintext))
    sealed = AESGCM(session._key).encrypt(_nonce(seq), plaintext, header)
    session._next_seq += 1
    session._key_bytes += len(plaintext)
    session.frames_sent += 1
    return MessageFrame(session.session_id, session.key_block_id, seq, sealed[:-TAG_BYTES], sealed[-TAG_BYTES:])


def decrypt_message(session: SecureSession, frame: MessageFrame) -> bytes:
    if frame.session_id != session.session_id:
        raise UnknownKeyError(f"frame belongs to session {frame.session_id}")
    if frame.sequence <= session._rx_last_seq:
        raise ReplayError(f"sequence {frame.sequence} already seen")
    key = session._rx_keys.get(frame.key_block_id)
    if key is None:
        try:
            key = session.pool.claim(frame.key_block_id).bits.to_bytes()
        except (KeyError, KeyReuseError) as exc:
            raise UnknownKeyError(str(exc)) from None
        session._rx_keys = {frame.key_block_id: key}
    try:
        plaintext = AESGCM(key).decrypt(_nonce(frame.sequence), frame.ciphertext + frame.tag, frame.header)
    except InvalidTag:
        raise IntegrityError(f"frame {frame.sequence} failed authentication") from None
    session._rx_last_seq = frame.sequence
    session.frames_received += 1
    return plaintext


def sustainable_message_rate(final_rate_bps: float, key_bits: int = KEY_BITS) -> float:
    """Messages per second a link can key under per-message refresh."""
    return final_rate_bps / key_bits
