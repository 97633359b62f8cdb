"""Command-line front end.

Exit codes: 0 success, 2 usage, 3 unparsable input, 4 invalid input or
scenario, 5 a route yields no secure key, 6 key starvation, 7 unreachable
node pair.
"""
from __future__ import annotations

import argparse
import logging
import secrets
import sys
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crypto import (
    PER_BYTES,
    PER_INTERVAL,
    PER_MESSAGE,
    MessageFrame,
    RefreshPolicy,
    decrypt_message,
    encrypt_message,
    open_session,
)
from .decoy import ProtocolParams, key_rate
from .network import KeyStarvationError, Network, SwitchConflictError, UnreachableError, switch_connect
from .records import RecordParseError, RecordValidationError, load_measurement_records
from .report import RunReport
from .scenario import BUILTIN, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_NO_KEY = 5
EXIT_STARVATION = 6
EXIT_UNREACHABLE = 7

DEFAULT_PULSES = 10_000_000


class CommandError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


# -- analyze ---------------------------------------------------------------------

def cmd_analyze(records_path, params: ProtocolParams | None = None, pessimistic: bool = False, scenario=None) -> RunReport:
    params = params or ProtocolParams()
    try:
        records = load_measurement_records(records_path)
    except RecordParseError as exc:
        raise CommandError(f"{records_path}: {exc}", EXIT_PARSE) from None
    except RecordValidationError as exc:
        raise CommandError(f"{records_path}: {exc}", EXIT_VALIDATION) from None
    except OSError as exc:
        raise CommandError(str(exc), EXIT_PARSE) from None
    links = {}
    if scenario is not None:
        links = load_scenario(scenario).topology.links
    report = RunReport(metadata={"source": str(records_path), "pessimistic": pessimistic})
    for route, stats in records:
        est = key_rate(stats, params, pessimistic=pessimistic)
        link = links.get(route)
        report.add_row(
            route=route,
            wavelength_nm=link.wavelength if link else None,
            distance_km=link.distance_km if link else None,
            attenuation_db=link.model.channel.attenuation_db if link else None,
            sifted_kbps=est.sifted_rate_bps / 1e3,
            qber=stats.signal.qber,
            final_kbps=est.final_rate_bps / 1e3,
            q1_lower=est.q1_lower,
            e1_upper=est.e1_upper,
            diagnostic=est.diagnostic,
        )
    return report


# -- simulate ----------------------------------------------------------------------

def stock_routes(network: Network, routes, pulses: int, seed: int):
    """Run one session per route; switched routes share the switch in turn."""
    seeds = np.random.SeedSequence(seed).generate_state(len(routes))
    reports, notes = [], []
    switch_clock = network.clock
    for route, s in zip(routes, seeds):
        link = network.topology.links[route]
        start = network.clock
        if link.via == "switch":
            switch = network.topology.switch
            if switch.active_leaf not in (None, link.b):
                notes.append(f"switch {switch.id}: {switch.hub}-{switch.active_leaf} released for {route}")
            switch_connect(switch, link.b)
            start = switch_clock
        rep = network.establish_link_keys(route, pulses, int(s), start_time=start)
        if link.via == "switch":
            switch_clock = start + rep.duration_s
        reports.append(rep)
    return reports, notes


def _link_rows(report: RunReport, link_reports):
    for r in link_reports:
        report.add_row(
            route=r.route, wavelength_nm=r.wavelength, distance_km=r.distance_km,
            attenuation_db=r.attenuation_db, sifted_kbps=r.sifted_kbps, qber=r.qber,
            final_kbps=r.final_kbps, q1_lower=r.q1_lower, e1_upper=r.e1_upper,
            diagnostic=r.diagnostic,
        )


def pool_summary(network: Network) -> dict:
    out = {}
    for pools in (network.pools, network.e2e_pools):
        for pair, pool in sorted(pools.items(), key=lambda kv: sorted(kv[0])):
            out["-".join(sorted(pair))] = {
                "produced": pool.produced_bits,
                "consumed": pool.consumed_bits,
                "remaining": pool.available_bits,
            }
    return out


def cmd_simulate(scenario=BUILTIN, seed: int | None = None, pulses: int = DEFAULT_PULSES):
    if seed is None:
        seed = secrets.randbits(32)
    try:
        sc = load_scenario(scenario)
    except ScenarioError as exc:
        raise CommandError(f"scenario: {exc}", EXIT_VALIDATION) from None
    network = Network(sc.topology, sc.params)
    link_reports, notes = stock_routes(network, list(sc.topology.links), pulses, seed)
    report = RunReport(metadata={"scenario": sc.name, "seed": seed, "pulses_per_link": pulses})
    _link_rows(report, link_reports)
    report.metadata["distilled_bits"] = {r.route: r.final_bits for r in link_reports}
    report.metadata["pools"] = pool_summary(network)
    if notes:
        report.metadata["scheduling"] = notes
    return report, network


# -- demo ----------------------------------------------------------------------------

class ClassicalBus:
    """In-process stand-in for the classical LAN."""

    def __init__(self):
        self._queue: deque[bytes] = deque()
        self.bytes_carried = 0

    def send(self, data: bytes) -> None:
        self.bytes_carried += len(data)
        self._queue.append(data)

    def receive(self) -> bytes:
        return self._queue.popleft()


@dataclass
class DemoTranscript:
    sender: str
    receiver: str
    path: str
    payload_bytes: int
    delivered_bytes: int = 0
    frames: list[tuple[int, int, int]] = field(default_factory=list)
    starved: str | None = None
    intact: bool = False
    accounting: dict = field(default_factory=dict)
    relay_consumption: dict = field(default_factory=dict)
    link_reports: list = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [f"path {self.path}"]
        for r in self.link_reports:
            out.append(f"stocked {r.route}: {r.final_bits} bits")
        for seq, block, n in self.frames:
            out.append(f"frame seq={seq} key_block={block} bytes={n}")
        out.append(f"delivered {self.delivered_bytes}/{self.payload_bytes} bytes, intact={self.intact}")
        if self.starved:
            out.append(f"starved: {self.starved}")
        for node, hops in self.relay_consumption.items():
            out.append(f"relay {node} consumed " + ", ".join(f"{h}: {b} bits" for h, b in hops.items()))
        for pair, acc in self.accounting.items():
            out.append(
                f"pool {pair}: produced {acc['produced']} = consumed {acc['consumed']} + remaining {acc['remaining']}"
            )
        return out


def parse_policy(text: str) -> RefreshPolicy:
    kind, _, limit = text.partition(":")
    if kind == PER_MESSAGE:
        return RefreshPolicy()
    if kind in (PER_BYTES, PER_INTERVAL) and limit:
        return RefreshPolicy(kind, float(limit))
    raise argparse.ArgumentTypeError(f"policy must be {PER_MESSAGE}, {PER_BYTES}:N or {PER_INTERVAL}:SECONDS")


def cmd_demo_messaging(
    scenario=BUILTIN,
    sender: str = "A",
    receiver: str = "B",
    payload: bytes = b"",
    seed: int | None = None,
    pulses: int = DEFAULT_PULSES,
    chunk_bytes: int = 4096,
    policy: RefreshPolicy | None = None,
    network: Network | None = None,
) -> tuple[DemoTranscript, Network]:
    """Encrypt ``payload`` from ``sender`` to ``receiver`` over the bus.

    Pools on the route are stocked first with one simulated session per hop
    unless a ready ``network`` is passed in.
    """
    if seed is None:
        seed = secrets.randbits(32)
    if network is None:
        try:
            sc = load_scenario(scenario)
        except ScenarioError as exc:
            raise CommandError(f"scenario: {exc}", EXIT_VALIDATION) from None
        network = Network(sc.topology, sc.params)
        stock = True
    else:
        stock = False
    topo = network.topology
    try:
        path = topo.relay_path(sender, receiver)
    except UnreachableError as exc:
        raise CommandError(f"{sender} -> {receiver}: {exc}", EXIT_UNREACHABLE) from None

    transcript = DemoTranscript(sender, receiver, str(path), len(payload))
    if stock:
        routes = [topo.link_between(a, b).route for a, b in path.hops]
        transcript.link_reports, _ = stock_routes(network, routes, pulses, seed)

    bus = ClassicalBus()
    received = bytearray()
    session = None
    try:
        session = open_session(network, sender, receiver, policy)
        for off in range(0, len(payload), chunk_bytes):
            chunk = payload[off:off + chunk_bytes]
            frame = encrypt_message(session, chunk)
            bus.send(frame.to_bytes())
            got = decrypt_message(session, MessageFrame.from_bytes(bus.receive()))
            received += got
            transcript.frames.append((frame.sequence, frame.key_block_id, len(chunk)))
    except KeyStarvationError as exc:
        transcript.starved = str(exc)
    transcript.delivered_bytes = len(received)
    transcript.intact = bytes(received) == payload[: len(received)]

    for relay in path.relays:
        i = path.nodes.index(relay)
        hops = [path.nodes[i - 1] + "-" + relay, relay + "-" + path.nodes[i + 1]]
        used = {}
        for h in hops:
            a, b = h.split("-")
            used[h] = network.ledger.total("consume", frozenset((a, b)), f"relay {path}")
        transcript.relay_consumption[relay] = used
    transcript.accounting = pool_summary(network)
    return transcript, network


# -- entry point -------------------------------------------------------------------------

def _params_from(args) -> ProtocolParams:
    return ProtocolParams(mu=args.mu, nu=args.nu, q_sift=args.q_sift, f_ec=args.f_ec)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qkdnet", description="Decoy-state QKD network analysis and simulation.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--format", choices=("text", "csv", "json"), default="text")

    a = sub.add_parser("analyze", help="key rates from measurement records")
    a.add_argument("records", type=Path)
    a.add_argument("--pessimistic", action="store_true", help="apply fluctuation bounds to measured gains")
    a.add_argument("--scenario", default=None, help="scenario supplying wavelength/distance metadata")
    a.add_argument("--mu", type=float, default=0.6)
    a.add_argument("--nu", type=float, default=0.2)
    a.add_argument("--q-sift", type=float, default=0.5)
    a.add_argument("--f-ec", type=float, default=1.2)
    common(a)

    s = sub.add_parser("simulate", help="simulate one session on every link")
    s.add_argument("scenario", nargs="?", default=BUILTIN)
    s.add_argument("--seed", type=int)
    s.add_argument("--pulses", type=int, default=DEFAULT_PULSES)
    common(s)

    d = sub.add_parser("demo", help="encrypted file transfer between two nodes")
    d.add_argument("scenario", nargs="?", default=BUILTIN)
    d.add_argument("--from", dest="sender", required=True)
    d.add_argument("--to", dest="receiver", required=True)
    d.add_argument("--file", type=Path, required=True)
    d.add_argument("--seed", type=int)
    d.add_argument("--pulses", type=int, default=DEFAULT_PULSES)
    d.add_argument("--chunk-bytes", type=int, default=4096)
    d.add_argument("--policy", type=parse_policy, default=RefreshPolicy())
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    out = sys.stdout
    try:
        if args.command == "analyze":
            report = cmd_analyze(args.records, _params_from(args), args.pessimistic, args.scenario)
            out.write(report.render(args.format))
            return EXIT_NO_KEY if report.insecure_routes else EXIT_OK
        if args.command == "simulate":
            if args.seed is None:
                args.seed = secrets.randbits(32)
                print(f"seed {args.seed}", file=sys.stderr)
            report, _ = cmd_simulate(args.scenario, args.seed, args.pulses)
            out.write(report.render(args.format))
            return EXIT_OK
        if args.command == "demo":
            if args.seed is None:
                args.seed = secrets.randbits(32)
                print(f"seed {args.seed}", file=sys.stderr)
            transcript, _ = cmd_demo_messaging(
                args.scenario, args.sender, args.receiver, args.file.read_bytes(),
                args.seed, args.pulses, args.chunk_bytes, args.policy,
            )
            out.write("\n".join(transcript.lines()) + "\n")
            if transcript.starved:
                return EXIT_STARVATION
            return EXIT_OK if transcript.intact else EXIT_VALIDATION
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except (ScenarioError, SwitchConflictError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
