"""Hierarchical network model: router backbone, switched subnet, trusted relays."""
from .keypool import KeyPool, KeyReuseError, KeyStarvationError, pair_key
from .orchestration import KeyLedger, LinkReport, Network
from .relay import (
    InsufficientKeyError,
    RelayOutcome,
    RelayPath,
    forwarding_words,
    recover_endpoint_key,
    relay_establish,
)
from .switch import OpticalSwitch, SwitchConflictError, switch_connect
from .topology import (
    Link,
    Node,
    QuantumRouter,
    Topology,
    TopologyError,
    UnreachableError,
    build_topology,
)
from .wavelengths import (
    ColoringError,
    assign_wavelengths,
    channel_count,
    check_edge_coloring,
    is_proper_coloring,
    round_robin_rounds,
)
