"""Measurement-record CSV reading and writing."""
from __future__ import annotations

import csv
import io
from importlib import resources
from pathlib import Path
from typing import Iterable, TextIO

from .decoy import ObservedStatistics, StateStatistics

COLUMNS = (
    "route",
    "n_mu", "q_mu", "e_mu",
    "n_nu", "q_nu", "e_nu",
    "n_vac", "q_vac", "e_vac",
    "duration_s",
)


class RecordError(ValueError):
    """Base class for malformed measurement records."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class RecordParseError(RecordError):
    pass


class RecordValidationError(RecordError):
    pass


def _open(source) -> tuple[TextIO, bool]:
    if isinstance(source, (str, Path)):
        return open(source, newline=""), True
    return source, False


def load_measurement_records(source) -> list[tuple[str, ObservedStatistics]]:
    """Parse a record CSV (path or text stream) into ``(route, stats)`` pairs.

    An empty source yields an empty list.  Malformed rows raise
    :class:`RecordParseError`; rows violating physical invariants raise
    :class:`RecordValidationError`.  Both carry the 1-based line number.
    """
    fh, owned = _open(source)
    try:
        text = fh.read()
    finally:
        if owned:
            fh.close()
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    header = [h.strip() for h in next(reader)]
    if tuple(header) != COLUMNS:
        raise RecordParseError(f"expected header {','.join(COLUMNS)}", line=1)

    out = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(COLUMNS):
            raise RecordParseError(f"expected {len(COLUMNS)} fields, got {len(row)}", line)
        route = row[0].strip()
        if not route:
            raise RecordParseError("empty route label", line)
        try:
            v = [float(c) for c in row[1:]]
        except ValueError as exc:
            raise RecordParseError(str(exc), line) from None
        try:
            stats = ObservedStatistics(
                StateStatistics(v[0], v[1], v[2]),
                StateStatistics(v[3], v[4], v[5]),
                StateStatistics(v[6], v[7], v[8]),
                duration_s=v[9],
            ).validate()
        except ValueError as exc:
            raise RecordValidationError(str(exc), line) from None
        out.append((route, stats))
    return out


def write_measurement_records(records: Iterable[tuple[str, ObservedStatistics]], dest: TextIO) -> None:
    w = csv.writer(dest, lineterminator="\n")
    w.writerow(COLUMNS)
    for route, s in records:
        w.writerow([
            route,
            repr(float(s.signal.n_pulses)), repr(s.signal.gain), repr(s.signal.qber),
            repr(float(s.decoy.n_pulses)), repr(s.decoy.gain), repr(s.decoy.qber),
            repr(float(s.vacuum.n_pulses)), repr(s.vacuum.gain), repr(s.vacuum.qber),
            repr(s.duration_s),
        ])


def field_records() -> list[tuple[str, ObservedStatistics]]:
    """The bundled field-test records of the seven-node metropolitan network."""
    ref = resources.files("qkdnet.data").joinpath("table2.csv")
    with ref.open("r", newline="") as fh:
        return load_measurement_records(fh)
