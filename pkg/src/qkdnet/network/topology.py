"""Network topology: nodes, router and switch devices, and QKD links."""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from ..linksim import FOUR_FIBER, ChannelModel, LinkModel
from .relay import RelayPath
from .switch import OpticalSwitch
from .wavelengths import ColoringError, assign_wavelengths, check_edge_coloring

ROLES = ("backbone", "subnet", "single-fiber-access")
FIBER_LOSS_DB_PER_KM = 0.2


class TopologyError(ValueError):
    pass


class UnreachableError(LookupError):
    pass


@dataclass(frozen=True)
class Node:
    id: str
    role: str = "backbone"
    is_relay: bool = False

    def __post_init__(self):
        if self.role not in ROLES:
            raise TopologyError(f"node {self.id}: unknown role {self.role!r}")


@dataclass
class QuantumRouter:
    id: str
    members: tuple[str, ...]
    wavelength_map: dict

    @property
    def port_count(self) -> int:
        return len(self.members)


@dataclass
class Link:
    route: str
    a: str
    b: str
    via: str  # "router", "switch" or "direct"
    device: str | None
    model: LinkModel
    wavelength: float | None = None
    distance_km: float | None = None
    calibrated_from: str | None = None

    @property
    def pair(self) -> frozenset:
        return frozenset((self.a, self.b))


@dataclass
class Topology:
    nodes: dict[str, Node]
    links: dict[str, Link] = field(default_factory=dict)
    router: QuantumRouter | None = None
    switch: OpticalSwitch | None = None

    def link_between(self, a: str, b: str) -> Link | None:
        key = frozenset((a, b))
        for link in self.links.values():
            if link.pair == key:
                return link
        return None

    def neighbors(self, node: str) -> list[str]:
        out = []
        for link in self.links.values():
            if node in link.pair:
                out.append(link.b if link.a == node else link.a)
        return sorted(out)

    @property
    def gateway(self) -> str | None:
        return self.switch.hub if self.switch else None

    def relay_path(self, a: str, b: str) -> RelayPath:
        """Fewest-hop path whose interior nodes are all trusted relays."""
        for n in (a, b):
            if n not in self.nodes:
                raise UnreachableError(f"unknown node {n}")
        if a == b:
            raise UnreachableError("source and destination coincide")
        prev = {a: None}
        queue = deque([a])
        while queue:
            cur = queue.popleft()
            if cur == b:
                break
            if cur != a and not self.nodes[cur].is_relay:
                continue
            for nxt in self.neighbors(cur):
                if nxt not in prev:
                    prev[nxt] = cur
                    queue.append(nxt)
        if b not in prev:
            raise UnreachableError(f"no trusted-relay path from {a} to {b}")
        path = [b]
        while path[-1] != a:
            path.append(prev[path[-1]])
        path.reverse()
        return RelayPath(tuple(path), tuple(self.nodes[n].is_relay for n in path))


def _route_label(a, b, device=None):
    return f"{a}-{device}-{b}" if device else f"{a}-{b}"


def _link_model(spec: dict, distance: float | None) -> LinkModel:
    if "attenuation_db" in spec:
        att = float(spec["attenuation_db"])
    else:
        att = FIBER_LOSS_DB_PER_KM * (distance or 0.0)
    channel = ChannelModel(
        length_km=distance or 0.0,
        attenuation_db=att,
        scheme=spec.get("scheme", FOUR_FIBER),
        crosstalk_noise_prob=float(spec.get("crosstalk_noise_prob", 0.0)),
    )
    return LinkModel(channel=channel, repetition_rate_hz=float(spec.get("repetition_rate_hz", 5e6)))


def build_topology(config: dict) -> Topology:
    """Build a :class:`Topology` from a scenario mapping.

    Router members are fully meshed through the router; switch leaves
    connect to the hub through the switch; other links are direct and must
    be declared.  Per-route parameters come from ``config["links"]``.
    Calibration against measured records is applied separately by
    :func:`qkdnet.scenario.calibrate_topology`.
    """
    try:
        nodes = {}
        for n in config.get("nodes", []):
            node = Node(str(n["id"]), n.get("role", "backbone"), bool(n.get("relay", False)))
            if node.id in nodes:
                raise TopologyError(f"duplicate node {node.id}")
            nodes[node.id] = node
    except KeyError as exc:
        raise TopologyError(f"node entry lacks {exc}") from None

    link_specs = {}
    for spec in config.get("links", []):
        if "route" not in spec:
            raise TopologyError("link entry lacks 'route'")
        link_specs[spec["route"]] = spec

    def need(node_id, what):
        if node_id not in nodes:
            raise TopologyError(f"{what} references unknown node {node_id}")

    topo = Topology(nodes)

    rcfg = config.get("router")
    if rcfg:
        members = tuple(str(m) for m in rcfg.get("members", []))
        for m in members:
            need(m, f"router {rcfg.get('id', 'R')}")
        explicit = rcfg.get("wavelengths")
        if explicit:
            wmap = {}
            for label, wl in explicit.items():
                a, b = label.split("-")
                wmap[frozenset((a, b))] = float(wl)
        else:
            wmap = assign_wavelengths(members, [float(w) for w in rcfg.get("palette", [])])
        try:
            check_edge_coloring(wmap, members)
        except ColoringError as exc:
            raise TopologyError(f"router wavelength map: {exc}") from None
        rid = str(rcfg.get("id", "R"))
        topo.router = QuantumRouter(rid, members, wmap)
        for i, a in enumerate(members):
            for b in members[i + 1:]:
                label = _route_label(a, b, rid)
                spec = link_specs.pop(label, {})
                dist = spec.get("distance_km")
                topo.links[label] = Link(
                    label, a, b, "router", rid, _link_model(spec, dist),
                    wavelength=wmap[frozenset((a, b))], distance_km=dist,
                    calibrated_from=spec.get("calibrate_from"),
                )

    scfg = config.get("switch")
    if scfg:
        sid = str(scfg.get("id", "S"))
        hub = str(scfg["hub"])
        leaves = tuple(str(x) for x in scfg.get("leaves", []))
        need(hub, f"switch {sid}")
        for leaf in leaves:
            need(leaf, f"switch {sid}")
        if nodes[hub].role != "backbone":
            raise TopologyError(f"switch hub {hub} must be a backbone node (the gateway)")
        topo.switch = OpticalSwitch(sid, hub, leaves)
        for leaf in leaves:
            label = _route_label(hub, leaf, sid)
            spec = link_specs.pop(label, {})
            dist = spec.get("distance_km")
            wl = spec.get("wavelength", scfg.get("wavelength"))
            topo.links[label] = Link(
                label, hub, leaf, "switch", sid, _link_model(spec, dist),
                wavelength=None if wl is None else float(wl), distance_km=dist,
                calibrated_from=spec.get("calibrate_from"),
            )

    for label, spec in link_specs.items():
        parts = label.split("-")
        if len(parts) != 2:
            raise TopologyError(f"route {label} names no known router or switch")
        a, b = parts
        need(a, f"link {label}")
        need(b, f"link {label}")
        if topo.link_between(a, b):
            raise TopologyError(f"duplicate link between {a} and {b}")
        dist = spec.get("distance_km")
        wl = spec.get("wavelength")
        topo.links[label] = Link(
            label, a, b, "direct", None, _link_model(spec, dist),
            wavelength=None if wl is None else float(wl), distance_km=dist,
            calibrated_from=spec.get("calibrate_from"),
        )
    return topo
