"""Trusted-relay key forwarding by XOR chaining.

Along a path ``n0 - n1 - ... - nk`` every hop holds its own QKD key.  The
delivered key is the first hop's key; each interior relay announces the XOR
of its two adjacent hop keys, and the far end strips the chain from its own
hop key.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from operator import xor


class InsufficientKeyError(RuntimeError):
    def __init__(self, message, hop=None):
        super().__init__(message)
        self.hop = hop


@dataclass(frozen=True)
class RelayPath:
    nodes: tuple[str, ...]
    trusted: tuple[bool, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise ValueError("a path needs at least two nodes")
        if len(self.trusted) != len(self.nodes):
            raise ValueError("one trust flag per node")
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("path revisits a node")
        bad = [n for n, t in zip(self.nodes[1:-1], self.trusted[1:-1]) if not t]
        if bad:
            raise ValueError(f"interior nodes {bad} are not trusted relays")

    @property
    def hops(self) -> list[tuple[str, str]]:
        return list(zip(self.nodes, self.nodes[1:]))

    @property
    def relays(self) -> tuple[str, ...]:
        return self.nodes[1:-1]

    def __str__(self):
        return "-".join(self.nodes)


def forwarding_words(hop_keys):
    """Public words announced by the relays: ``k[i] ^ k[i+1]``.

    Works for anything supporting ``^`` (ints, numpy arrays, BitStrings).
    """
    return [a ^ b for a, b in zip(hop_keys, hop_keys[1:])]


def recover_endpoint_key(last_hop_key, words):
    """Key the far end derives from its own hop key and the announced words."""
    return reduce(xor, words, last_hop_key)


@dataclass(frozen=True)
class RelayOutcome:
    path: RelayPath
    source_key: object
    destination_key: object
    words: tuple
    hop_block_ids: tuple[int, ...]


def relay_establish(path: RelayPath, pools, length: int) -> RelayOutcome:
    """Deliver a ``length``-bit key between the ends of ``path``.

    ``pools`` maps ``frozenset({a, b})`` to the hop's :class:`KeyPool`.
    Availability on every hop is checked before anything is consumed, so a
    starving hop leaves all pools untouched.
    """
    hops = path.hops
    hop_pools = []
    for a, b in hops:
        pool = pools.get(frozenset((a, b)))
        if pool is None:
            raise InsufficientKeyError(f"no QKD link {a}-{b}", hop=(a, b))
        if pool.available_bits < length:
            raise InsufficientKeyError(
                f"hop {a}-{b} holds {pool.available_bits} bits, {length} needed", hop=(a, b)
            )
        hop_pools.append(pool)

    # the near end of each hop withdraws, the far end (a relay or the
    # destination) claims the same block
    issued = [pool.withdraw(length) for pool in hop_pools]
    near = [blk.bits for blk in issued]
    far = [pool.claim(blk.block_id).bits for pool, blk in zip(hop_pools, issued)]

    # relay i holds far[i-1] and near[i]; both equal the hop keys
    words = tuple(a ^ b for a, b in zip(far[:-1], near[1:]))
    destination = recover_endpoint_key(far[-1], words)
    return RelayOutcome(path, near[0], destination, words, tuple(b.block_id for b in issued))
