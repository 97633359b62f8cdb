"""Key distribution across the whole network on a single timeline."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from ..bits import BitString
from ..decoy import ProtocolParams, key_rate
from ..linksim import aggregate_statistics, simulate_events
from ..postprocessing import (
    ReconciliationError,
    SecretKeyBlock,
    cascade_reconcile,
    final_length,
    live_final_length,
    privacy_amplify,
    sift,
)
from ..postprocessing.cascade import MAX_QBER
from .keypool import KeyPool, pair_key
from .relay import RelayOutcome, RelayPath, relay_establish
from .switch import switch_connect
from .topology import Topology

log = logging.getLogger(__name__)

MIN_RECONCILE_BITS = 64


@dataclass
class LinkReport:
    route: str
    wavelength: float | None
    distance_km: float | None
    attenuation_db: float
    n_pulses: int
    duration_s: float
    sifted_kbps: float
    qber: float
    final_kbps: float
    q1_lower: float
    e1_upper: float
    sifted_bits: int = 0
    leaked_bits: int = 0
    verification_bits: int = 0
    nominal_final_bits: int = 0
    final_bits: int = 0
    diagnostic: str | None = None

    @property
    def secure(self) -> bool:
        return self.final_bits > 0


@dataclass
class KeyLedger:
    """Bit accounting per pool: what was produced and what took it."""

    entries: list[tuple[str, frozenset, int, str]] = field(default_factory=list)

    def record(self, kind: str, pair: frozenset, bits: int, purpose: str) -> None:
        self.entries.append((kind, pair, bits, purpose))

    def total(self, kind: str, pair: frozenset | None = None, purpose: str | None = None) -> int:
        return sum(
            b for k, p, b, why in self.entries
            if k == kind and (pair is None or p == pair) and (purpose is None or why == purpose)
        )


class Network:
    """A topology plus its key pools, a protocol setting and a clock."""

    def __init__(self, topology: Topology, params: ProtocolParams | None = None):
        self.topology = topology
        self.params = params or ProtocolParams()
        self.pools: dict[frozenset, KeyPool] = {
            link.pair: KeyPool(link.a, link.b) for link in topology.links.values()
        }
        self.e2e_pools: dict[frozenset, KeyPool] = {}
        self.ledger = KeyLedger()
        self.clock = 0.0
        self.timeline: list[tuple[float, float, str]] = []
        self._session_counter = 0

    # -- single link ---------------------------------------------------------

    def establish_link_keys(self, route: str, n_pulses: int, seed: int, start_time: float | None = None) -> LinkReport:
        """Run one QKD session on ``route`` and bank the distilled key.

        Simulates the pulses, estimates the secure rate from the session's
        own decoy statistics, sifts the signal-state detections, reconciles
        with Cascade and compresses by the measured leakage.  A session
        without a secure key leaves the pool unchanged.
        """
        link = self.topology.links.get(route)
        if link is None:
            raise KeyError(f"unknown route {route}")
        switch = self.topology.switch if link.via == "switch" else None
        self._session_counter += 1
        session_id = f"{route}#{self._session_counter}"
        if switch is not None:
            switch.begin_session(link.b, session_id)
        try:
            report, block = self._run_session(link, n_pulses, seed)
        finally:
            if switch is not None:
                switch.end_session()
        t0 = self.clock if start_time is None else start_time
        self.timeline.append((t0, t0 + report.duration_s, route))
        if block is not None:
            self.pools[link.pair].deposit(block)
            self.ledger.record("produce", link.pair, len(block), "qkd")
        else:
            log.info("%s: no key banked (%s)", session_id, report.diagnostic)
        return report

    def _run_session(self, link, n_pulses, seed):
        params = self.params
        sim_seed, ec_seed, pa_seed = np.random.SeedSequence(seed).spawn(3)
        events = simulate_events(link.model, params, n_pulses, sim_seed)
        stats = aggregate_statistics(events)
        estimate = key_rate(stats, params)
        report = LinkReport(
            route=link.route,
            wavelength=link.wavelength,
            distance_km=link.distance_km,
            attenuation_db=link.model.channel.attenuation_db,
            n_pulses=n_pulses,
            duration_s=stats.duration_s,
            sifted_kbps=estimate.sifted_rate_bps / 1e3,
            qber=stats.signal.qber,
            final_kbps=estimate.final_rate_bps / 1e3,
            q1_lower=estimate.q1_lower,
            e1_upper=estimate.e1_upper,
            diagnostic=estimate.diagnostic,
        )
        pair = sift(
            events.sender_bits, events.sender_bases, events.receiver_bits, events.receiver_bases,
            events.detected, keep=events.state == 0,
            qber_estimate=min(stats.signal.qber, 0.5),
        )
        report.sifted_bits = len(pair)
        report.nominal_final_bits = final_length(len(pair), estimate, stats, params)
        if not estimate.secure:
            return report, None
        if len(pair) < MIN_RECONCILE_BITS or not 0 < pair.estimated_qber <= MAX_QBER:
            report.diagnostic = f"sifted key unsuitable for reconciliation ({len(pair)} bits, QBER {pair.estimated_qber:.4f})"
            return report, None
        try:
            rec = cascade_reconcile(pair, seed=int(ec_seed.generate_state(1)[0]))
        except ReconciliationError as exc:
            report.diagnostic = f"block discarded: {exc}"
            return report, None
        report.leaked_bits = rec.bits_leaked
        report.verification_bits = rec.verification_bits
        m = live_final_length(len(pair), rec.bits_leaked + rec.verification_bits, estimate, stats)
        if m == 0:
            report.diagnostic = "measured reconciliation leakage leaves no secret bits"
            return report, None
        rng = np.random.default_rng(pa_seed)
        hash_seed = BitString.random(len(pair) + m - 1, rng)
        ends = tuple(sorted((link.a, link.b)))
        sender_block = privacy_amplify(pair.sender_bits, hash_seed, m, ends)
        receiver_block = privacy_amplify(rec.corrected_bits, hash_seed, m, ends)
        if sender_block.bits != receiver_block.bits:
            report.diagnostic = "distilled keys disagree; block discarded"
            return report, None
        report.final_bits = m
        return report, sender_block

    # -- many links ------------------------------------------------------------

    def session_pulses(self, route: str, duration_s: float) -> int:
        """Pulses that fit in ``duration_s``; rounded down so a session never overruns its slot."""
        return math.floor(self.topology.links[route].model.repetition_rate_hz * duration_s)

    def run_schedule(self, duration_s: float, quantum_s: float, seed: int, routes=None) -> list[LinkReport]:
        """Advance the clock by ``duration_s`` in slots of ``quantum_s``.

        Router and direct links run in every slot, in parallel.  The switch
        serves its leaves round-robin, one leaf per slot.
        """
        if quantum_s <= 0 or duration_s <= 0:
            raise ValueError("duration and quantum must be positive")
        routes = list(self.topology.links) if routes is None else list(routes)
        switch = self.topology.switch
        switched = [r for r in routes if self.topology.links[r].via == "switch"]
        parallel = [r for r in routes if r not in switched]
        n_slots = int(round(duration_s / quantum_s))
        seeds = iter(np.random.SeedSequence(seed).generate_state(n_slots * (len(parallel) + 1)))
        reports = []
        for slot in range(n_slots):
            t0 = self.clock
            for route in parallel:
                reports.append(self.establish_link_keys(route, self.session_pulses(route, quantum_s), int(next(seeds)), t0))
            s = int(next(seeds))
            if switched:
                route = switched[slot % len(switched)]
                switch_connect(switch, self.topology.links[route].b)
                reports.append(self.establish_link_keys(route, self.session_pulses(route, quantum_s), s, t0))
            self.clock = t0 + quantum_s
        return reports

    # -- end to end ------------------------------------------------------------

    def pool(self, a: str, b: str) -> KeyPool:
        return self.pools[pair_key(a, b)]

    def relay_establish(self, path: RelayPath, length: int) -> RelayOutcome:
        outcome = relay_establish(path, self.pools, length)
        for a, b in path.hops:
            self.ledger.record("consume", pair_key(a, b), length, f"relay {path}")
        return outcome

    def end_to_end_pool(self, a: str, b: str) -> KeyPool:
        key = pair_key(a, b)
        if key not in self.e2e_pools:
            self.e2e_pools[key] = KeyPool(a, b)
        return self.e2e_pools[key]

    def relay_refill(self, path: RelayPath, length: int) -> None:
        """Establish ``length`` relay bits and bank them for the end pair."""
        outcome = self.relay_establish(path, length)
        if outcome.source_key != outcome.destination_key:
            raise RuntimeError(f"relay {path} delivered inconsistent keys")
        pool = self.end_to_end_pool(path.nodes[0], path.nodes[-1])
        pool.deposit(SecretKeyBlock(outcome.source_key, tuple(sorted(pool.pair))))
        self.ledger.record("produce", pool.pair, length, f"relay {path}")

    def conservation_errors(self) -> list[str]:
        """Pools whose produced bits differ from consumed plus remaining."""
        bad = []
        for pools in (self.pools, self.e2e_pools):
            for pair, pool in pools.items():
                produced = self.ledger.total("produce", pair)
                consumed = self.ledger.total("consume", pair)
                if produced != consumed + pool.available_bits or produced != pool.produced_bits:
                    bad.append(
                        f"{'-'.join(sorted(pair))}: produced {produced}, consumed {consumed}, "
                        f"remaining {pool.available_bits}"
                    )
        return bad
