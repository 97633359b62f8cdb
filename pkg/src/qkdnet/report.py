"""Table-style run reports in text, CSV and JSON."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

COLUMNS = (
    "route", "wavelength_nm", "distance_km", "attenuation_db",
    "sifted_kbps", "qber", "final_kbps", "q1_lower", "e1_upper", "diagnostic",
)

_TEXT_FORMATS = {
    "wavelength_nm": "{:.0f}",
    "distance_km": "{:.1f}",
    "attenuation_db": "{:.2f}",
    "sifted_kbps": "{:.3f}",
    "qber": "{:.4f}",
    "final_kbps": "{:.3f}",
    "q1_lower": "{:.6f}",
    "e1_upper": "{:.5f}",
}


@dataclass
class RunReport:
    rows: list[dict] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add_row(self, **values) -> None:
        unknown = set(values) - set(COLUMNS)
        if unknown:
            raise KeyError(f"unknown report columns {sorted(unknown)}")
        self.rows.append({c: values.get(c) for c in COLUMNS})

    @property
    def routes(self) -> list[str]:
        return [r["route"] for r in self.rows]

    @property
    def insecure_routes(self) -> list[str]:
        return [r["route"] for r in self.rows if not (r["final_kbps"] or 0) > 0]

    def to_json(self) -> str:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        rows = [{k: clean(v) for k, v in r.items()} for r in self.rows]
        return json.dumps({"metadata": self.metadata, "rows": rows}, indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in self.rows:
            w.writerow(["" if r[c] is None else (repr(r[c]) if isinstance(r[c], float) else r[c]) for c in COLUMNS])
        return buf.getvalue()

    def to_text(self) -> str:
        def fmt(col, v):
            if v is None or (isinstance(v, float) and math.isnan(v)):
                return "-"
            spec = _TEXT_FORMATS.get(col)
            return spec.format(v) if spec else str(v)

        cols = [c for c in COLUMNS if c != "diagnostic"]
        table = [cols] + [[fmt(c, r[c]) for c in cols] for r in self.rows]
        widths = [max(len(row[i]) for row in table) for i in range(len(cols))]
        lines = ["  ".join(cell.rjust(w) for cell, w in zip(row, widths)) for row in table]
        for r in self.rows:
            if r["diagnostic"]:
                lines.append(f"note {r['route']}: {r['diagnostic']}")
        for k, v in self.metadata.items():
            lines.append(f"# {k}: {v}")
        return "\n".join(lines) + "\n"

    def render(self, fmt: str) -> str:
        return {"text": self.to_text, "csv": self.to_csv, "json": self.to_json}[fmt]()
