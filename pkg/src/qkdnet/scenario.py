"""Scenario files: YAML descriptions of a network run.

Top-level keys (all optional except ``nodes``)::

    name:        free text
    protocol:    {mu, nu, q_sift, f_ec, mix}
    records:     measurement CSV path (relative to the scenario) or "builtin:table2"
    calibration: "exact" (default) or "basic"
    nodes:       [{id, role: backbone|subnet|single-fiber-access, relay: bool}]
    router:      {id, members: [...], palette: [nm...], wavelengths: {"A-B": nm}}
    switch:      {id, hub, leaves: [...], wavelength}
    links:       [{route, distance_km, attenuation_db, scheme, crosstalk_noise_prob,
                   repetition_rate_hz, wavelength, calibrate_from: <record route>}]
    schedule:    {quantum_s}
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import yaml

from .decoy import ProtocolParams
from .linksim import CalibrationError, calibrate_link
from .network.topology import Topology, TopologyError, build_topology
from .records import field_records, load_measurement_records

BUILTIN = "builtin:paper"


class ScenarioError(ValueError):
    pass


@dataclass
class Scenario:
    name: str
    params: ProtocolParams
    topology: Topology
    quantum_s: float = 1.0
    records: dict = field(default_factory=dict)


def _load_mapping(source) -> tuple[dict, Path | None]:
    if source in (None, BUILTIN):
        text = resources.files("qkdnet.data").joinpath("paper_network.yaml").read_text()
        return yaml.safe_load(text), None
    path = Path(source)
    try:
        data = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ScenarioError(f"{path}: scenario must be a mapping")
    return data, path.parent


def _records(ref, base: Path | None) -> dict:
    if ref is None:
        return {}
    if ref == "builtin:table2":
        return dict(field_records())
    path = Path(ref)
    if not path.is_absolute() and base is not None:
        path = base / path
    return dict(load_measurement_records(path))


def calibrate_topology(topology: Topology, records: dict, params: ProtocolParams, method: str = "exact") -> Topology:
    """Replace the model of every link that names a record with a fitted one."""
    for link in topology.links.values():
        if not link.calibrated_from:
            continue
        target = records.get(link.calibrated_from)
        if target is None:
            raise ScenarioError(f"link {link.route}: no record named {link.calibrated_from}")
        try:
            link.model = calibrate_link(target, params, link.model.channel, method=method)
        except CalibrationError as exc:
            raise ScenarioError(f"link {link.route}: {exc}") from None
    return topology


def load_scenario(source=None) -> Scenario:
    """Load a scenario file, or the bundled seven-node network when ``source`` is None."""
    data, base = _load_mapping(source)
    try:
        params = ProtocolParams(**{k: (tuple(v) if k == "mix" else v) for k, v in (data.get("protocol") or {}).items()})
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"protocol: {exc}") from None
    if not data.get("nodes"):
        raise ScenarioError("scenario declares no nodes")
    try:
        topology = build_topology(data)
    except (TopologyError, KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(str(exc)) from None
    records = _records(data.get("records"), base)
    calibrate_topology(topology, records, params, data.get("calibration", "exact"))
    quantum = float((data.get("schedule") or {}).get("quantum_s", 1.0))
    return Scenario(data.get("name", "scenario"), params, topology, quantum, records)
