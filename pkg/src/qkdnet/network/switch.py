"""Optical switch serving one hub and several leaves, one at a time."""
from __future__ import annotations

from dataclasses import dataclass, field


class SwitchConflictError(RuntimeError):
    pass


@dataclass
class OpticalSwitch:
    id: str
    hub: str
    leaves: tuple[str, ...]
    active_leaf: str | None = None
    in_flight: str | None = None
    aborted: list[str] = field(default_factory=list)

    def begin_session(self, leaf: str, session_id: str) -> None:
        if leaf != self.active_leaf:
            raise SwitchConflictError(
                f"switch {self.id} connects {self.hub}-{self.active_leaf}, not {self.hub}-{leaf}"
            )
        if self.in_flight is not None:
            raise SwitchConflictError(f"switch {self.id} already carries session {self.in_flight}")
        self.in_flight = session_id

    def end_session(self) -> None:
        self.in_flight = None


def switch_connect(switch: OpticalSwitch, leaf: str) -> OpticalSwitch:
    """Route the switch to ``leaf``.

    A session still running on another leaf is aborted and its partial data
    dropped; reconnecting the active leaf changes nothing.
    """
    if leaf not in switch.leaves:
        raise ValueError(f"{leaf} is not a leaf of switch {switch.id}")
    if leaf == switch.active_leaf:
        return switch
    if switch.in_flight is not None:
        switch.aborted.append(switch.in_flight)
        switch.in_flight = None
    switch.active_leaf = leaf
    return switch
