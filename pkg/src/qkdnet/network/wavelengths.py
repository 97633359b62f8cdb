"""Wavelength assignment for a passive WDM quantum router.

Every pair of router ports needs its own wavelength and no port may receive
two pairs on the same wavelength, i.e. a proper edge colouring of K_n.
"""
from __future__ import annotations

from itertools import combinations
from typing import Sequence


class ColoringError(ValueError):
    pass


def channel_count(n: int, directed: bool = False) -> int:
    """Simultaneous channels through an ``n``-port router."""
    return n * (n - 1) if directed else n * (n - 1) // 2


def colors_needed(n: int) -> int:
    if n < 2:
        return 0
    return n - 1 if n % 2 == 0 else n


def round_robin_rounds(n: int) -> list[list[tuple[int, int]]]:
    """1-factorisation of K_n by the circle method.

    Vertex ``n-1`` (or a dummy, when ``n`` is odd) stays fixed while the
    others rotate; round ``r`` pairs ``r`` with the fixed vertex and
    ``r+k`` with ``r-k``.
    """
    if n < 2:
        return []
    m = n if n % 2 == 0 else n + 1
    fixed = m - 1
    rounds = []
    for r in range(m - 1):
        pairs = []
        if fixed < n:
            pairs.append((r, fixed))
        for k in range(1, m // 2):
            a, b = (r + k) % (m - 1), (r - k) % (m - 1)
            pairs.append((min(a, b), max(a, b)))
        rounds.append(pairs)
    return rounds


def assign_wavelengths(nodes: Sequence[str] | int, palette: Sequence[float]) -> dict[frozenset, float]:
    if isinstance(nodes, int):
        nodes = [str(i) for i in range(nodes)]
    nodes = list(nodes)
    need = colors_needed(len(nodes))
    if len(palette) < need:
        raise ColoringError(f"{len(nodes)} ports need {need} wavelengths, palette has {len(palette)}")
    out = {}
    for color, pairs in enumerate(round_robin_rounds(len(nodes))):
        for i, j in pairs:
            out[frozenset((nodes[i], nodes[j]))] = palette[color]
    return out


def check_edge_coloring(wavelength_map: dict, nodes: Sequence[str] | None = None) -> None:
    """Raise :class:`ColoringError` unless the map is a proper colouring of
    the complete graph on ``nodes`` (inferred from the map if omitted)."""
    if nodes is None:
        nodes = sorted({v for pair in wavelength_map for v in pair})
    for a, b in combinations(nodes, 2):
        if frozenset((a, b)) not in wavelength_map:
            raise ColoringError(f"no wavelength for pair {a}-{b}")
    seen: dict[tuple[str, float], frozenset] = {}
    for pair, wl in wavelength_map.items():
        if len(pair) != 2:
            raise ColoringError(f"malformed pair {set(pair)}")
        for v in pair:
            prev = seen.setdefault((v, wl), pair)
            if prev != pair:
                raise ColoringError(
                    f"port {v} receives {'-'.join(sorted(prev))} and {'-'.join(sorted(pair))} on {wl} nm"
                )


def is_proper_coloring(wavelength_map: dict, nodes: Sequence[str] | None = None) -> bool:
    try:
        check_edge_coloring(wavelength_map, nodes)
    except ColoringError:
        return False
    return True
